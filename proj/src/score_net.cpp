#include "liediff/score_net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "liediff/diffusion.hpp"

namespace liediff
{

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd glorot(int rows, int cols, Rng& rng)
{
  const double bound = std::sqrt(6.0 / (rows + cols));
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i)
      m(i, j) = rng.uniform(-bound, bound);
  return m;
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

void validate_config(const NetConfig& c)
{
  if (c.width < 1 || c.blocks < 1 || c.pose_freqs < 1 || c.time_freqs < 1 || c.embed_dim < 1 ||
      c.num_shapes < 1)
    throw std::invalid_argument("NetConfig: all sizes must be positive");
  if (c.sigmas.size() < 2)
    throw std::invalid_argument("NetConfig: need at least two noise levels");
  for (double s : c.sigmas)
    if (!(s > 0.0))
      throw std::invalid_argument("NetConfig: noise levels must be positive");
}

// Positional features for every column of v (rows = components).
MatrixXd encode_columns(const MatrixXd& v, int n_freq)
{
  MatrixXd out(2 * n_freq * v.rows(), v.cols());
  for (int n = 0; n < v.cols(); ++n)
    for (int d = 0; d < v.rows(); ++d)
    {
      double scale = M_PI;
      for (int k = 0; k < n_freq; ++k, scale *= 2.0)
      {
        const double a = scale * v(d, n);
        out(2 * (d * n_freq + k), n) = std::sin(a);
        out(2 * (d * n_freq + k) + 1, n) = std::cos(a);
      }
    }
  return out;
}

// Rotation coordinates map [-pi, pi] onto one period; translations get a
// period of 4 pi so the whole noised range stays unambiguous.
VectorXd input_scale(const NetConfig& c)
{
  VectorXd s = VectorXd::Constant(c.tangent_dim(), 1.0 / M_PI);
  if (c.tangent_dim() == 6)
    s.head<3>().setConstant(0.5 / M_PI);
  return s;
}

MatrixXd condition_matrix(const ScoreNetParams& p, const NetBatch& batch)
{
  const NetConfig& c = p.config;
  const int L = c.num_levels();
  MatrixXd t(1, batch.size());
  for (int n = 0; n < batch.size(); ++n)
    t(0, n) = static_cast<double>(batch.levels[n]) / (L - 1);
  MatrixXd cond(c.cond_dim(), batch.size());
  cond.topRows(2 * c.time_freqs) = encode_columns(t, c.time_freqs);
  for (int n = 0; n < batch.size(); ++n)
    cond.col(n).tail(c.embed_dim) = p.embed.col(batch.shapes[n]);
  return cond;
}

void validate_batch(const ScoreNetParams& p, const NetBatch& batch)
{
  const NetConfig& c = p.config;
  if (batch.x.rows() != c.tangent_dim())
    throw std::invalid_argument("net: input dimension does not match the model's mode");
  if (static_cast<int>(batch.levels.size()) != batch.size() ||
      static_cast<int>(batch.shapes.size()) != batch.size())
    throw std::invalid_argument("net: batch field sizes disagree");
  for (int n = 0; n < batch.size(); ++n)
  {
    if (batch.levels[n] < 0 || batch.levels[n] >= c.num_levels())
      throw std::invalid_argument("net: noise index " + std::to_string(batch.levels[n]) + " out of range");
    if (batch.shapes[n] < 0 || batch.shapes[n] >= c.num_shapes)
      throw std::invalid_argument("net: shape id " + std::to_string(batch.shapes[n]) + " out of range");
  }
}

struct BlockCache
{
  MatrixXd h_in, A, B, cos_h, sin_h, g, u, act;
};

struct ForwardCache
{
  MatrixXd pose_feat, cond, h_final, head;
  std::vector<BlockCache> blocks;
  VectorXd inv_sigma;
};

MatrixXd forward_impl(const ScoreNetParams& p, const NetBatch& batch, ForwardCache* cache)
{
  validate_batch(p, batch);
  const NetConfig& c = p.config;
  const int N = batch.size();

  const MatrixXd pose_feat = encode_columns(input_scale(c).asDiagonal() * batch.x, c.pose_freqs);
  const MatrixXd cond = condition_matrix(p, batch);

  MatrixXd h = p.W_in * pose_feat;
  h.colwise() += p.b_in.col(0);

  std::vector<BlockCache> caches;
  for (const NetBlock& blk : p.blocks)
  {
    BlockCache bc;
    bc.h_in = h;
    bc.A = blk.cond.Wa * cond;
    bc.A.colwise() += blk.cond.ba.col(0);
    bc.B = blk.cond.Wb * cond;
    bc.B.colwise() += blk.cond.bb.col(0);
    if (c.conditioning == Conditioning::Fourier)
    {
      bc.cos_h = (M_PI * h.array()).cos().matrix();
      bc.sin_h = (M_PI * h.array()).sin().matrix();
      bc.g = (bc.A.array() * bc.cos_h.array() + bc.B.array() * bc.sin_h.array()).matrix();
    }
    else
    {
      bc.g = (bc.A.array() * h.array() + bc.B.array()).matrix();
    }
    bc.u = blk.cond.W * bc.g;
    bc.u.colwise() += blk.cond.b.col(0);
    bc.act = bc.u.unaryExpr([](double u) { return u * sigmoid(u); });
    MatrixXd delta = blk.W2 * bc.act;
    delta.colwise() += blk.b2.col(0);
    h += delta;
    if (cache)
      caches.push_back(std::move(bc));
  }

  MatrixXd head = p.W_out * h;
  head.colwise() += p.b_out.col(0);
  VectorXd inv_sigma(N);
  for (int n = 0; n < N; ++n)
    inv_sigma[n] = 1.0 / c.sigmas[batch.levels[n]];
  MatrixXd out = head * inv_sigma.asDiagonal();

  if (cache)
  {
    cache->pose_feat = pose_feat;
    cache->cond = cond;
    cache->h_final = h;
    cache->head = head;
    cache->blocks = std::move(caches);
    cache->inv_sigma = inv_sigma;
  }
  return out;
}

// --- binary helpers -------------------------------------------------------

constexpr char kMagic[8] = {'L', 'D', 'S', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v)
{
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in)
    throw std::runtime_error("checkpoint: unexpected end of file");
  return v;
}

void put_tensor(std::ostream& out, const std::string& name, const MatrixXd& m)
{
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void get_tensor(std::istream& in, const std::string& expected_name, MatrixXd& m)
{
  const auto len = get<std::uint32_t>(in);
  if (len > 4096)
    throw std::runtime_error("checkpoint: corrupt tensor name");
  std::string name(len, '\0');
  in.read(name.data(), len);
  const auto rows = get<std::uint32_t>(in);
  const auto cols = get<std::uint32_t>(in);
  if (name != expected_name || rows != m.rows() || cols != m.cols())
    throw std::runtime_error("checkpoint: tensor '" + name + "' does not match architecture (expected '" +
                             expected_name + "')");
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in)
    throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
}

ScoreNetParams shaped_params(const NetConfig& c)
{
  validate_config(c);
  ScoreNetParams p;
  p.config = c;
  const int d = c.width;
  p.W_in = MatrixXd::Zero(d, c.pose_features());
  p.b_in = MatrixXd::Zero(d, 1);
  p.embed = MatrixXd::Zero(c.embed_dim, c.num_shapes);
  p.blocks.resize(c.blocks);
  for (NetBlock& blk : p.blocks)
  {
    blk.cond.Wa = MatrixXd::Zero(d, c.cond_dim());
    blk.cond.ba = MatrixXd::Zero(d, 1);
    blk.cond.Wb = MatrixXd::Zero(d, c.cond_dim());
    blk.cond.bb = MatrixXd::Zero(d, 1);
    blk.cond.W = MatrixXd::Zero(d, d);
    blk.cond.b = MatrixXd::Zero(d, 1);
    blk.W2 = MatrixXd::Zero(d, d);
    blk.b2 = MatrixXd::Zero(d, 1);
  }
  p.W_out = MatrixXd::Zero(c.tangent_dim(), d);
  p.b_out = MatrixXd::Zero(c.tangent_dim(), 1);
  return p;
}

}  // namespace

std::string_view to_string(Conditioning c) { return c == Conditioning::Fourier ? "fourier" : "scale_bias"; }

Conditioning parse_conditioning(std::string_view text)
{
  if (text == "fourier")
    return Conditioning::Fourier;
  if (text == "scale_bias")
    return Conditioning::ScaleBias;
  throw std::invalid_argument("unknown conditioning '" + std::string(text) + "'");
}

std::size_t ScoreNetParams::parameter_count() const
{
  std::size_t n = 0;
  for_each([&](const std::string&, const MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

ScoreNetParams ScoreNetParams::zeros_like() const
{
  ScoreNetParams z = *this;
  z.for_each([](const std::string&, MatrixXd& m) { m.setZero(); });
  return z;
}

bool ScoreNetParams::all_finite() const
{
  bool ok = true;
  for_each([&](const std::string&, const MatrixXd& m) { ok = ok && m.allFinite(); });
  return ok;
}

ScoreNetParams init_params(const NetConfig& config, Rng& rng)
{
  ScoreNetParams p = shaped_params(config);
  // Every weight matrix gets Glorot init; biases stay zero.
  p.for_each([&](const std::string& name, MatrixXd& m) {
    const auto dot = name.rfind('.');
    const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
    if (leaf[0] == 'b')
      return;
    m = glorot(static_cast<int>(m.rows()), static_cast<int>(m.cols()), rng);
  });
  return p;
}

VectorXd positional_encode(const VectorXd& v, int n_freq)
{
  if (n_freq < 1)
    throw std::invalid_argument("positional_encode: n_freq must be >= 1");
  return encode_columns(v, n_freq).col(0);
}

VectorXd fourier_layer(const VectorXd& x, const VectorXd& c, const ConditionedLayer& layer)
{
  const VectorXd A = layer.Wa * c + layer.ba.col(0);
  const VectorXd B = layer.Wb * c + layer.bb.col(0);
  const VectorXd g = (A.array() * (M_PI * x.array()).cos() + B.array() * (M_PI * x.array()).sin()).matrix();
  return layer.W * g;
}

Eigen::MatrixXd fourier_layer_dx(const VectorXd& x, const VectorXd& c, const ConditionedLayer& layer)
{
  const VectorXd A = layer.Wa * c + layer.ba.col(0);
  const VectorXd B = layer.Wb * c + layer.bb.col(0);
  const VectorXd dg =
      (M_PI * (B.array() * (M_PI * x.array()).cos() - A.array() * (M_PI * x.array()).sin())).matrix();
  return layer.W * dg.asDiagonal();
}

VectorXd scale_bias_layer(const VectorXd& x, const VectorXd& c, const ConditionedLayer& layer)
{
  const VectorXd A = layer.Wa * c + layer.ba.col(0);
  const VectorXd B = layer.Wb * c + layer.bb.col(0);
  return (A.array() * x.array() + B.array()).matrix();
}

Eigen::MatrixXd scale_bias_layer_dx(const VectorXd&, const VectorXd& c, const ConditionedLayer& layer)
{
  const VectorXd A = layer.Wa * c + layer.ba.col(0);
  return A.asDiagonal();
}

VectorXd condition_vector(const ScoreNetParams& params, int noise_index, int shape_id)
{
  NetBatch b{MatrixXd::Zero(params.config.tangent_dim(), 1), {noise_index}, {shape_id}};
  validate_batch(params, b);
  return condition_matrix(params, b).col(0);
}

Eigen::MatrixXd net_forward_batch(const ScoreNetParams& params, const NetBatch& batch)
{
  return forward_impl(params, batch, nullptr);
}

ScoreVector net_forward(const ScoreNetParams& params, const Tangent& x, int noise_index, int shape_id)
{
  NetBatch b{x, {noise_index}, {shape_id}};
  return forward_impl(params, b, nullptr).col(0);
}

LossAndGrads net_backward(const ScoreNetParams& p, const NetBatch& batch, const MatrixXd& targets,
                          const std::vector<double>& weights)
{
  const int N = batch.size();
  if (N == 0)
    throw std::invalid_argument("net_backward: empty minibatch");
  if (targets.rows() != p.config.tangent_dim() || targets.cols() != N)
    throw std::invalid_argument("net_backward: target shape mismatch");
  if (!weights.empty() && static_cast<int>(weights.size()) != N)
    throw std::invalid_argument("net_backward: weight count mismatch");

  ForwardCache fc;
  const MatrixXd out = forward_impl(p, batch, &fc);
  const MatrixXd resid = out - targets;

  VectorXd w = VectorXd::Ones(N);
  if (!weights.empty())
    w = Eigen::Map<const VectorXd>(weights.data(), N);

  LossAndGrads r;
  r.loss = 0.5 * (resid.colwise().squaredNorm().transpose().array() * w.array()).sum() / N;
  r.grads = p.zeros_like();
  ScoreNetParams& g = r.grads;

  // d loss / d head, folding in the per-column 1/sigma output scale.
  const VectorXd col_scale = (w.array() * fc.inv_sigma.array()).matrix() / N;
  const MatrixXd d_head = resid * col_scale.asDiagonal();
  g.W_out = d_head * fc.h_final.transpose();
  g.b_out = d_head.rowwise().sum();
  MatrixXd d_h = p.W_out.transpose() * d_head;

  MatrixXd d_cond = MatrixXd::Zero(fc.cond.rows(), N);
  for (int k = static_cast<int>(p.blocks.size()) - 1; k >= 0; --k)
  {
    const NetBlock& blk = p.blocks[k];
    const BlockCache& bc = fc.blocks[k];
    NetBlock& gb = g.blocks[k];

    gb.W2 = d_h * bc.act.transpose();
    gb.b2 = d_h.rowwise().sum();
    const MatrixXd d_act = blk.W2.transpose() * d_h;
    const MatrixXd d_u = d_act.binaryExpr(bc.u, [](double da, double u) {
      const double s = sigmoid(u);
      return da * (s + u * s * (1.0 - s));
    });
    gb.cond.W = d_u * bc.g.transpose();
    gb.cond.b = d_u.rowwise().sum();
    const MatrixXd d_g = blk.cond.W.transpose() * d_u;

    MatrixXd d_A, d_B, d_hin;
    if (p.config.conditioning == Conditioning::Fourier)
    {
      d_A = (d_g.array() * bc.cos_h.array()).matrix();
      d_B = (d_g.array() * bc.sin_h.array()).matrix();
      d_hin = (M_PI * d_g.array() * (bc.B.array() * bc.cos_h.array() - bc.A.array() * bc.sin_h.array())).matrix();
    }
    else
    {
      d_A = (d_g.array() * bc.h_in.array()).matrix();
      d_B = d_g;
      d_hin = (d_g.array() * bc.A.array()).matrix();
    }
    gb.cond.Wa = d_A * fc.cond.transpose();
    gb.cond.ba = d_A.rowwise().sum();
    gb.cond.Wb = d_B * fc.cond.transpose();
    gb.cond.bb = d_B.rowwise().sum();
    d_cond.noalias() += blk.cond.Wa.transpose() * d_A;
    d_cond.noalias() += blk.cond.Wb.transpose() * d_B;

    d_h += d_hin;  // residual path carries d_h through unchanged
  }

  g.W_in = d_h * fc.pose_feat.transpose();
  g.b_in = d_h.rowwise().sum();
  const int e0 = 2 * p.config.time_freqs;
  for (int n = 0; n < N; ++n)
    g.embed.col(batch.shapes[n]) += d_cond.col(n).segment(e0, p.config.embed_dim);
  return r;
}

// --- checkpoints ----------------------------------------------------------

void write_checkpoint(std::ostream& out, const ScoreNetParams& params, const AdamState* adam)
{
  const NetConfig& c = params.config;
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.mode));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.conditioning));
  for (int v : {c.width, c.blocks, c.pose_freqs, c.time_freqs, c.embed_dim, c.num_shapes, c.num_levels()})
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  for (double s : c.sigmas)
    put<double>(out, s);

  std::uint32_t count = 0;
  params.for_each([&](const std::string&, const MatrixXd&) { ++count; });
  put<std::uint32_t>(out, count);
  params.for_each([&](const std::string& name, const MatrixXd& m) { put_tensor(out, name, m); });

  put<std::uint32_t>(out, adam ? 1u : 0u);
  if (adam)
  {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(adam->step));
    for (std::size_t i = 0; i < adam->m.size(); ++i)
    {
      put_tensor(out, "m", adam->m[i]);
      put_tensor(out, "v", adam->v[i]);
    }
  }
  if (!out)
    throw std::runtime_error("checkpoint: write failed");
}

ScoreNetParams read_checkpoint(std::istream& in, AdamState* adam)
{
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  NetConfig c;
  const auto mode = get<std::uint32_t>(in);
  const auto cond = get<std::uint32_t>(in);
  if (mode > 2 || cond > 1)
    throw std::runtime_error("checkpoint: corrupt header");
  c.mode = static_cast<ParamMode>(mode);
  c.conditioning = static_cast<Conditioning>(cond);
  c.width = static_cast<int>(get<std::uint32_t>(in));
  c.blocks = static_cast<int>(get<std::uint32_t>(in));
  c.pose_freqs = static_cast<int>(get<std::uint32_t>(in));
  c.time_freqs = static_cast<int>(get<std::uint32_t>(in));
  c.embed_dim = static_cast<int>(get<std::uint32_t>(in));
  c.num_shapes = static_cast<int>(get<std::uint32_t>(in));
  const auto levels = get<std::uint32_t>(in);
  if (levels > 1'000'000)
    throw std::runtime_error("checkpoint: corrupt level count");
  c.sigmas.resize(levels);
  for (double& s : c.sigmas)
    s = get<double>(in);

  ScoreNetParams p = shaped_params(c);
  std::uint32_t count = 0;
  p.for_each([&](const std::string&, const MatrixXd&) { ++count; });
  if (get<std::uint32_t>(in) != count)
    throw std::runtime_error("checkpoint: tensor count does not match architecture");
  p.for_each([&](const std::string& name, MatrixXd& m) { get_tensor(in, name, m); });

  const auto has_adam = get<std::uint32_t>(in);
  if (has_adam && adam)
  {
    *adam = AdamState::for_params(p);
    adam->step = static_cast<long>(get<std::uint64_t>(in));
    for (std::size_t i = 0; i < adam->m.size(); ++i)
    {
      get_tensor(in, "m", adam->m[i]);
      get_tensor(in, "v", adam->v[i]);
    }
  }
  return p;
}

void save_checkpoint(const std::string& path, const ScoreNetParams& params, const AdamState* adam)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  write_checkpoint(out, params, adam);
}

ScoreNetParams load_checkpoint(const std::string& path, AdamState* adam)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in, adam);
}

}  // namespace liediff
