#include "liediff/rng.hpp"

#include <cmath>

namespace liediff
{

namespace
{
std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

Rng Rng::split() { return Rng(splitmix64(next_u64())); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n)
{
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t r;
  do
  {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double Rng::normal()
{
  if (has_spare_)
  {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Vec3 Rng::normal3()
{
  const double a = normal();
  const double b = normal();
  const double c = normal();
  return {a, b, c};
}

Eigen::VectorXd Rng::normal_vec(int n)
{
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i)
    v[i] = normal();
  return v;
}

Rotation Rng::uniform_rotation()
{
  double w, x, y, z;
  do
  {
    w = normal();
    x = normal();
    y = normal();
    z = normal();
  } while (w * w + x * x + y * y + z * z < 1e-12);
  return Rotation::from_quaternion(w, x, y, z);
}

}  // namespace liediff
