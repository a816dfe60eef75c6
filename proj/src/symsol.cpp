#include "liediff/symsol.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace liediff
{

namespace
{

constexpr int kCoarseScan = 720;
constexpr double kGoldenTol = 1e-10;

struct ScanResult
{
  double angle;
  Rotation rot;
};

// Minimize angle(target, base * flip * R(axis, theta)) over theta.
ScanResult minimize_circle(const Rotation& target, const Rotation& base, const ContinuousComponent& c)
{
  const Rotation lead = base * c.flip;
  auto at = [&](double theta) { return lead * Rotation::about_axis(c.axis, theta); };
  auto f = [&](double theta) { return angle_between(target, at(theta)); };

  const double step = 2.0 * M_PI / kCoarseScan;
  int best = 0;
  double best_val = f(0.0);
  for (int k = 1; k < kCoarseScan; ++k)
  {
    const double v = f(k * step);
    if (v < best_val)
    {
      best_val = v;
      best = k;
    }
  }

  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = (best - 1) * step, b = (best + 1) * step;
  double c1 = b - inv_phi * (b - a), c2 = a + inv_phi * (b - a);
  double f1 = f(c1), f2 = f(c2);
  while (b - a > kGoldenTol)
  {
    if (f1 < f2)
    {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - inv_phi * (b - a);
      f1 = f(c1);
    }
    else
    {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + inv_phi * (b - a);
      f2 = f(c2);
    }
  }
  const double theta = 0.5 * (a + b);
  ScanResult r{f(theta), at(theta)};
  if (best_val < r.angle)
    r = {best_val, at(best * step)};
  return r;
}

bool contains(const std::vector<Rotation>& set, const Rotation& r)
{
  for (const Rotation& s : set)
    if (angle_between(s, r) < 1e-6)
      return true;
  return false;
}

std::string fmt17(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(Shape shape)
{
  switch (shape)
  {
    case Shape::Tet: return "tet";
    case Shape::Cube: return "cube";
    case Shape::Icosa: return "icosa";
    case Shape::Cone: return "cone";
    case Shape::Cyl: return "cyl";
  }
  return "?";
}

Shape parse_shape(std::string_view text)
{
  for (Shape s : {Shape::Tet, Shape::Cube, Shape::Icosa, Shape::Cone, Shape::Cyl})
    if (to_string(s) == text)
      return s;
  throw std::invalid_argument("unknown shape '" + std::string(text) + "'");
}

std::vector<Shape> parse_shape_list(std::string_view text)
{
  std::vector<Shape> out;
  std::size_t start = 0;
  while (start <= text.size())
  {
    const std::size_t end = std::min(text.find(',', start), text.size());
    if (end > start)
      out.push_back(parse_shape(text.substr(start, end - start)));
    start = end + 1;
  }
  if (out.empty())
    throw std::invalid_argument("empty shape list");
  return out;
}

std::vector<Rotation> close_group(const std::vector<Rotation>& generators, std::size_t limit)
{
  std::vector<Rotation> group{Rotation()};
  for (std::size_t i = 0; i < group.size(); ++i)
    for (const Rotation& g : generators)
    {
      const Rotation r = group[i] * g;
      if (!contains(group, r))
      {
        group.push_back(r);
        if (group.size() > limit)
          throw std::runtime_error("close_group: generators do not span a finite group");
      }
    }
  return group;
}

SymmetrySpec symmetry_group(Shape shape)
{
  SymmetrySpec spec;
  spec.shape = shape;
  const double third = 2.0 * M_PI / 3.0;
  switch (shape)
  {
    case Shape::Tet:
      spec.discrete = close_group({Rotation::about_axis({1, 1, 1}, third), Rotation::about_axis({1, -1, -1}, third)});
      break;
    case Shape::Cube:
      spec.discrete = close_group({Rotation::about_axis(Vec3::UnitZ(), M_PI / 2), Rotation::about_axis(Vec3::UnitX(), M_PI / 2)});
      break;
    case Shape::Icosa:
    {
      const double golden = 0.5 * (1.0 + std::sqrt(5.0));
      spec.discrete = close_group({Rotation::about_axis({0, 1, golden}, 2.0 * M_PI / 5.0),
                                   Rotation::about_axis({1, 1, 1}, third)});
      break;
    }
    case Shape::Cone:
      spec.discrete = {Rotation()};
      spec.continuous = {{Vec3::UnitZ(), Rotation()}};
      break;
    case Shape::Cyl:
      spec.discrete = {Rotation()};
      spec.continuous = {{Vec3::UnitZ(), Rotation()}, {Vec3::UnitZ(), Rotation::about_axis(Vec3::UnitX(), M_PI)}};
      break;
  }
  return spec;
}

Dataset gen_dataset(const std::vector<Shape>& shapes, int n_per_shape, double translation_lo, double translation_hi,
                    ParamMode mode, std::uint64_t seed)
{
  if (n_per_shape < 1)
    throw std::invalid_argument("gen_dataset: n_per_shape must be >= 1");
  if (!(translation_lo <= translation_hi))
    throw std::invalid_argument("gen_dataset: invalid translation range");
  Dataset d;
  d.mode = mode;
  d.seed = seed;
  d.translation_lo = translation_lo;
  d.translation_hi = translation_hi;
  d.shapes = shapes;
  d.n_per_shape = n_per_shape;
  d.samples.reserve(shapes.size() * static_cast<std::size_t>(n_per_shape));

  Rng root(seed);
  for (std::size_t s = 0; s < shapes.size(); ++s)
  {
    Rng rng = root.split();
    for (int n = 0; n < n_per_shape; ++n)
    {
      PoseSample p;
      p.shape_id = static_cast<int>(s);
      p.mode = mode;
      p.pose.rot = rng.uniform_rotation();
      for (int k = 0; k < 3; ++k)
        p.pose.trans[k] = rng.uniform(translation_lo, translation_hi);
      if (mode == ParamMode::SO3)
        p.pose.trans.setZero();
      d.samples.push_back(p);
    }
  }
  return d;
}

void write_dataset(std::ostream& out, const Dataset& d)
{
  nlohmann::json header = {{"schema", "symsol-synth/1"},
                           {"mode", std::string(to_string(d.mode))},
                           {"seed", d.seed},
                           {"translation_range", {d.translation_lo, d.translation_hi}},
                           {"n_per_shape", d.n_per_shape}};
  header["shapes"] = nlohmann::json::array();
  for (Shape s : d.shapes)
    header["shapes"].push_back(std::string(to_string(s)));
  out << header.dump() << '\n';
  for (const PoseSample& p : d.samples)
  {
    const auto q = p.pose.rot.coeffs_wxyz();
    out << "{\"shape_id\":" << p.shape_id << ",\"q\":[" << fmt17(q[0]) << ',' << fmt17(q[1]) << ',' << fmt17(q[2])
        << ',' << fmt17(q[3]) << "],\"t\":[" << fmt17(p.pose.trans[0]) << ',' << fmt17(p.pose.trans[1]) << ','
        << fmt17(p.pose.trans[2]) << "]}\n";
  }
  if (!out)
    throw std::runtime_error("dataset: write failed");
}

Dataset read_dataset(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("dataset: missing header");
  Dataset d;
  try
  {
    const auto h = nlohmann::json::parse(line);
    if (h.at("schema") != "symsol-synth/1")
      throw std::runtime_error("dataset: unsupported schema");
    d.mode = parse_mode(h.at("mode").get<std::string>());
    d.seed = h.at("seed").get<std::uint64_t>();
    d.translation_lo = h.at("translation_range").at(0).get<double>();
    d.translation_hi = h.at("translation_range").at(1).get<double>();
    d.n_per_shape = h.at("n_per_shape").get<int>();
    for (const auto& s : h.at("shapes"))
      d.shapes.push_back(parse_shape(s.get<std::string>()));

    std::size_t lineno = 1;
    while (std::getline(in, line))
    {
      ++lineno;
      if (line.empty())
        continue;
      const auto r = nlohmann::json::parse(line);
      PoseSample p;
      p.mode = d.mode;
      p.shape_id = r.at("shape_id").get<int>();
      if (p.shape_id < 0 || p.shape_id >= static_cast<int>(d.shapes.size()))
        throw std::runtime_error("dataset: shape_id out of range on line " + std::to_string(lineno));
      const auto& q = r.at("q");
      p.pose.rot = Rotation::from_quaternion(q.at(0), q.at(1), q.at(2), q.at(3));
      const auto& t = r.at("t");
      p.pose.trans = Vec3(t.at(0), t.at(1), t.at(2));
      d.samples.push_back(p);
    }
  }
  catch (const nlohmann::json::exception& e)
  {
    throw std::runtime_error(std::string("dataset: malformed record: ") + e.what());
  }
  return d;
}

void save_dataset(const std::string& path, const Dataset& data)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset(out, data);
}

Dataset load_dataset(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

Rotation closest_equivalent(const SymmetrySpec& spec, const Rotation& target, const Rotation& pose)
{
  double best = std::numeric_limits<double>::infinity();
  Rotation out = pose;
  for (const Rotation& s : spec.discrete)
  {
    const Rotation r = pose * s;
    const double a = angle_between(target, r);
    if (a < best)
    {
      best = a;
      out = r;
    }
  }
  for (const ContinuousComponent& c : spec.continuous)
  {
    const ScanResult r = minimize_circle(target, pose, c);
    if (r.angle < best)
    {
      best = r.angle;
      out = r.rot;
    }
  }
  return out;
}

double equivalent_distance(const SymmetrySpec& spec, const Rotation& gt, const Rotation& pred)
{
  double best = std::numeric_limits<double>::infinity();
  for (const Rotation& s : spec.discrete)
    best = std::min(best, angle_between(pred, gt * s));
  for (const ContinuousComponent& c : spec.continuous)
    best = std::min(best, minimize_circle(pred, gt, c).angle);
  return best * 180.0 / M_PI;
}

std::pair<int, double> nearest_mode(const SymmetrySpec& spec, const Rotation& gt, const Rotation& pred)
{
  if (!spec.is_discrete())
    throw std::invalid_argument("nearest_mode: continuous symmetries have no discrete modes");
  int best = 0;
  double best_angle = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < spec.discrete.size(); ++k)
  {
    const double a = angle_between(pred, gt * spec.discrete[k]);
    if (a < best_angle)
    {
      best_angle = a;
      best = static_cast<int>(k);
    }
  }
  return {best, best_angle};
}

RigidTransform observation_frame(const SymmetrySpec& spec, const RigidTransform& gt)
{
  return {closest_equivalent(spec, Rotation(), gt.rot), gt.trans};
}

RigidTransform to_observation(const SymmetrySpec& spec, const RigidTransform& gt, ParamMode mode)
{
  RigidTransform rel = compose(inverse(observation_frame(spec, gt), mode), gt, mode);
  rel.trans.setZero();  // exact zero instead of rounding residue
  return rel;
}

}  // namespace liediff
