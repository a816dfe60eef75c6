#include "liediff/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "liediff/diffusion.hpp"
#include "liediff/eval.hpp"
#include "liediff/score_net.hpp"
#include "liediff/symsol.hpp"
#include "liediff/verify.hpp"

namespace liediff
{

namespace fs = std::filesystem;

namespace
{

struct Common
{
  std::uint64_t seed = 0;
  std::string run_dir;
};

struct SamplingFlags
{
  int levels = 100;
  double eps0 = kDefaultEps0;
  int substeps = 1;
  int inner_steps = 1;
  bool no_polish = false;

  NoiseSchedule schedule(const ScoreNetParams& p) const
  {
    return make_schedule(p.config.sigmas.front(), p.config.sigmas.back(), levels, eps0);
  }
  SamplerConfig sampler() const
  {
    SamplerConfig c;
    c.substeps = substeps;
    c.inner_steps = inner_steps;
    c.polish = !no_polish;
    return c;
  }
};

void add_common(CLI::App* sub, Common& c)
{
  sub->add_option("--seed", c.seed, "Random seed")->required();
  sub->add_option("--run-dir", c.run_dir, "Run directory (default: $LIEDIFF_RUN_ROOT/<command>-<seed>)");
}

void add_sampling(CLI::App* sub, SamplingFlags& s)
{
  sub->add_option("--levels", s.levels, "Noise levels used by the sampler")->check(CLI::Range(2, 100000));
  sub->add_option("--eps0", s.eps0, "Langevin step scale at sigma_max")->check(CLI::PositiveNumber);
  sub->add_option("--substeps", s.substeps, "Sub-steps per noise level")->check(CLI::Range(1, 100000));
  sub->add_option("--inner-steps", s.inner_steps, "Langevin updates per noise level")->check(CLI::Range(1, 100000));
  sub->add_flag("--no-polish", s.no_polish, "Skip the final noise-free step");
}

fs::path resolve_run_dir(const Common& c, const std::string& command)
{
  if (!c.run_dir.empty())
    return c.run_dir;
  const char* root = std::getenv("LIEDIFF_RUN_ROOT");
  return fs::path(root && *root ? root : "runs") / (command + "-" + std::to_string(c.seed));
}

fs::path prepare_run_dir(const CLI::App& app, const Common& c, const std::string& command)
{
  const fs::path dir = resolve_run_dir(c, command);
  const CLI::App* sub = app.get_subcommand(command);
  fs::create_directories(dir);
  std::ofstream out(dir / "config.ini", std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + (dir / "config.ini").string());
  out << "[" << command << "]\n" << sub->config_to_str(true, false);
  return dir;
}

std::string fmt17(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_pose_line(std::ostream& out, const RigidTransform& x)
{
  const auto q = x.rot.coeffs_wxyz();
  out << "{\"q\":[" << fmt17(q[0]) << ',' << fmt17(q[1]) << ',' << fmt17(q[2]) << ',' << fmt17(q[3]) << "],\"t\":["
      << fmt17(x.trans[0]) << ',' << fmt17(x.trans[1]) << ',' << fmt17(x.trans[2]) << "]}\n";
}

std::vector<Rotation> read_pose_rotations(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path + "'");
  std::vector<Rotation> out;
  std::string line;
  while (std::getline(in, line))
  {
    if (line.empty())
      continue;
    const auto j = nlohmann::json::parse(line);
    const auto& q = j.at("q");
    out.push_back(Rotation::from_quaternion(q.at(0), q.at(1), q.at(2), q.at(3)));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text)
{
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size())
  {
    const std::size_t end = std::min(text.find(',', start), text.size());
    if (end > start)
    {
      std::size_t used = 0;
      const std::string item = text.substr(start, end - start);
      const int v = std::stoi(item, &used);
      if (used != item.size())
        throw std::invalid_argument("bad integer '" + item + "'");
      out.push_back(v);
    }
    start = end + 1;
  }
  if (out.empty())
    throw std::invalid_argument("empty integer list");
  return out;
}

std::string score_kind_near(const std::string& checkpoint)
{
  std::ifstream in(fs::path(checkpoint).parent_path() / "config.ini");
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("score-kind=", 0) == 0)
    {
      std::string v = line.substr(11);
      std::erase(v, '"');
      return v;
    }
  return "surrogate";
}

// --- subcommands -----------------------------------------------------------

int run_verify(const CLI::App& app, const Common& c, bool inject_fault, std::string out_path)
{
  const fs::path dir = prepare_run_dir(app, c, "verify");
  VerifyFaults faults;
  faults.so3_left_is_right = inject_fault;
  const VerifyReport report = verify_suite(c.seed, faults);
  for (const VerifyRow& r : report.rows)
    std::printf("%s %-26s value=%.3e %s %.1e\n", r.pass ? "PASS" : "FAIL", r.property.c_str(), r.value,
                r.lower_bound ? ">" : "<", r.threshold);
  if (out_path.empty())
    out_path = (dir / "verify.jsonl").string();
  std::ofstream out(out_path, std::ios::binary);
  write_verify_report(out, report);
  std::printf("%zu/%zu properties passed\n", report.rows.size() - report.failures(), report.rows.size());
  return report.failures() == 0 ? kExitOk : kExitFailure;
}

struct GenFlags
{
  std::string shapes = "tet,cube";
  int n = 2000;
  std::string mode = "so3";
  double t_lo = -1.0, t_hi = 1.0;
  std::string out;
};

int run_gen(const CLI::App& app, const Common& c, const GenFlags& g)
{
  const fs::path dir = prepare_run_dir(app, c, "gen-data");
  const Dataset d = gen_dataset(parse_shape_list(g.shapes), g.n, g.t_lo, g.t_hi, parse_mode(g.mode), c.seed);
  const std::string path = g.out.empty() ? (dir / "data.jsonl").string() : g.out;
  save_dataset(path, d);
  std::printf("wrote %zu samples to %s\n", d.samples.size(), path.c_str());
  return kExitOk;
}

struct TrainFlags
{
  std::string data;
  TrainConfig cfg;
  std::string score_kind = "surrogate";
  std::string conditioning = "fourier";
  std::string weighting = "sigma2";
  long log_every = 100;
  long ckpt_every = 0;
  std::string resume;
};

int run_train(const CLI::App& app, const Common& c, TrainFlags& t)
{
  const fs::path dir = prepare_run_dir(app, c, "train");
  const Dataset data = load_dataset(t.data);
  TrainConfig cfg = t.cfg;
  cfg.mode = data.mode;
  cfg.seed = c.seed;
  cfg.score_kind = parse_score_kind(t.score_kind);
  cfg.conditioning = parse_conditioning(t.conditioning);
  if (t.weighting == "sigma2")
    cfg.weighting = LossWeighting::SigmaSquared;
  else if (t.weighting == "uniform")
    cfg.weighting = LossWeighting::Uniform;
  else
    throw CLI::ValidationError("--weighting", "must be sigma2 or uniform");

  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary | std::ios::app);
  const auto t0 = std::chrono::steady_clock::now();
  TrainCallbacks cb;
  cb.log_every = t.log_every;
  cb.on_log = [&](const TrainProgress& p) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    metrics << nlohmann::json{{"step", p.step}, {"loss", p.loss}, {"lr", p.lr}, {"wall_time", wall}}.dump() << '\n';
    metrics.flush();
    std::printf("step %ld loss %.6f lr %.3g\n", p.step, p.loss, p.lr);
    std::fflush(stdout);
  };
  cb.checkpoint_every = t.ckpt_every;
  cb.on_checkpoint = [&](long step, const ScoreNetParams& p, const AdamState& s) {
    save_checkpoint((dir / ("ckpt_" + std::to_string(step) + ".bin")).string(), p, &s);
  };

  ScoreNetParams init;
  AdamState adam;
  const bool resume = !t.resume.empty();
  if (resume)
    init = load_checkpoint(t.resume, &adam);
  const ScoreNetParams params =
      train(cfg, observation_data(data), static_cast<int>(data.shapes.size()), cb, resume ? &init : nullptr, &adam);
  save_checkpoint((dir / "model.bin").string(), params, &adam);
  std::printf("saved %s\n", (dir / "model.bin").string().c_str());
  return kExitOk;
}

struct SampleFlags
{
  std::string checkpoint;
  int shape_id = 0;
  int n = 100;
  std::string data;
  int gt_index = -1;
  std::string out;
  SamplingFlags sampling;
};

std::vector<RigidTransform> draw_samples(const SampleFlags& s, std::uint64_t seed, const ScoreNetParams& params)
{
  Rng rng(seed);
  std::vector<RigidTransform> xs = sample_batch(net_score_fn(params, s.shape_id), s.sampling.schedule(params),
                                                params.config.mode, s.n, rng, s.sampling.sampler());
  if (!s.data.empty())
  {
    const Dataset d = load_dataset(s.data);
    if (s.gt_index < 0 || s.gt_index >= static_cast<int>(d.samples.size()))
      throw CLI::ValidationError("--gt-index", "required with --data and must index a record");
    const PoseSample& gt = d.samples[s.gt_index];
    const RigidTransform frame = observation_frame(symmetry_group(d.shapes[gt.shape_id]), gt.pose);
    for (RigidTransform& x : xs)
      x = compose(frame, x, params.config.mode);
  }
  return xs;
}

int run_sample(const CLI::App& app, const Common& c, const SampleFlags& s)
{
  const fs::path dir = prepare_run_dir(app, c, "sample");
  const ScoreNetParams params = load_checkpoint(s.checkpoint);
  const auto xs = draw_samples(s, c.seed, params);
  const std::string path = s.out.empty() ? (dir / "samples.jsonl").string() : s.out;
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const RigidTransform& x : xs)
    write_pose_line(out, x);
  std::printf("wrote %zu samples to %s\n", xs.size(), path.c_str());
  return kExitOk;
}

struct EvalFlags
{
  std::string checkpoint;
  std::string data;
  int samples = 1000;
  int gts = 10;
  std::string out;
  SamplingFlags sampling;
};

EvalOptions eval_options(const EvalFlags& e, std::uint64_t seed, const ScoreNetParams& params)
{
  EvalOptions o;
  o.samples = e.samples;
  o.gts = e.gts;
  o.schedule = e.sampling.schedule(params);
  o.sampler = e.sampling.sampler();
  o.seed = seed;
  return o;
}

int run_eval(const CLI::App& app, const Common& c, const EvalFlags& e)
{
  const fs::path dir = prepare_run_dir(app, c, "eval");
  const ScoreNetParams params = load_checkpoint(e.checkpoint);
  const Dataset data = load_dataset(e.data);
  const EvalReport report = evaluate_model(params, data, eval_options(e, c.seed, params));
  const std::string path = e.out.empty() ? (dir / "report.jsonl").string() : e.out;
  std::ofstream out(path, std::ios::binary);
  write_report(out, report);
  write_report(std::cout, report);
  return kExitOk;
}

struct AblateFlags
{
  EvalFlags eval;
  std::string steps = "100,50,10,5";
  std::string score_kind;
};

int run_ablate(const CLI::App& app, const Common& c, const AblateFlags& a)
{
  const fs::path dir = prepare_run_dir(app, c, "ablate-steps");
  const ScoreNetParams params = load_checkpoint(a.eval.checkpoint);
  const Dataset data = load_dataset(a.eval.data);
  const std::string kind = a.score_kind.empty() ? score_kind_near(a.eval.checkpoint) : a.score_kind;
  const std::string path = a.eval.out.empty() ? (dir / "ablation.csv").string() : a.eval.out;
  std::ofstream out(path, std::ios::binary);
  out << "score_kind,steps,shape,spread_deg,trans_err\n";
  std::printf("score_kind,steps,shape,spread_deg,trans_err\n");
  for (int steps : parse_int_list(a.steps))
  {
    EvalFlags e = a.eval;
    e.sampling.levels = steps;
    const EvalReport r = evaluate_model(params, data, eval_options(e, c.seed, params));
    for (const ShapeReport& s : r.shapes)
    {
      char row[160];
      std::snprintf(row, sizeof(row), "%s,%d,%s,%.6f,%.6f\n", kind.c_str(), steps, std::string(to_string(s.shape)).c_str(),
                    s.spread_deg, s.trans_err);
      out << row;
      std::fputs(row, stdout);
    }
  }
  return kExitOk;
}

struct VizFlags
{
  SampleFlags sample;
  std::string samples_file;
};

int run_viz(const CLI::App& app, const Common& c, const VizFlags& v)
{
  const fs::path dir = prepare_run_dir(app, c, "export-viz");
  std::vector<Rotation> rots;
  if (!v.samples_file.empty())
    rots = read_pose_rotations(v.samples_file);
  else
  {
    if (v.sample.checkpoint.empty())
      throw CLI::ValidationError("export-viz", "needs --checkpoint or --samples");
    const ScoreNetParams params = load_checkpoint(v.sample.checkpoint);
    for (const RigidTransform& x : draw_samples(v.sample, c.seed, params))
      rots.push_back(x.rot);
  }
  const std::string path = v.sample.out.empty() ? (dir / "mollweide.csv").string() : v.sample.out;
  const std::size_t rows = mollweide_export(rots, path);
  std::printf("wrote %zu rows to %s\n", rows, path.c_str());
  return kExitOk;
}

}  // namespace

int dispatch(int argc, const char* const* argv)
{
  CLI::App app{"Score-based diffusion on SO(3), R3xSO(3) and SE(3)", "liediff"};
  app.set_config("--config", "", "INI config file (flags override it)");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Common common;

  bool inject_fault = false;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "Run the math self-check suite");
  add_common(verify, common);
  verify->add_flag("--inject-fault", inject_fault, "Swap the SO(3) left Jacobian for the right one");
  verify->add_option("--out", verify_out, "Report path (JSONL)");

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic symmetric-shape pose dataset");
  add_common(gen_cmd, common);
  gen_cmd->add_option("--shapes", gen.shapes, "Comma-separated shapes: tet,cube,icosa,cone,cyl");
  gen_cmd->add_option("--n", gen.n, "Poses per shape")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--mode", gen.mode, "so3, r3so3 or se3");
  gen_cmd->add_option("--t-min", gen.t_lo, "Lower translation bound per axis");
  gen_cmd->add_option("--t-max", gen.t_hi, "Upper translation bound per axis");
  gen_cmd->add_option("--out", gen.out, "Output JSONL path");

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "Train a score model with denoising score matching");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", tr.data, "Dataset JSONL")->required();
  train_cmd->add_option("--steps", tr.cfg.total_steps, "Optimizer steps");
  train_cmd->add_option("--batch", tr.cfg.batch_size, "Data points per step");
  train_cmd->add_option("--fan-out", tr.cfg.fan_out, "Noisy samples per data point");
  train_cmd->add_option("--levels", tr.cfg.levels, "Number of noise levels");
  train_cmd->add_option("--sigma-min", tr.cfg.sigma_min, "Smallest noise scale");
  train_cmd->add_option("--sigma-max", tr.cfg.sigma_max, "Largest noise scale");
  train_cmd->add_option("--lr", tr.cfg.lr_initial, "Initial learning rate");
  train_cmd->add_option("--lr-final", tr.cfg.lr_final, "Final learning rate");
  train_cmd->add_option("--score-kind", tr.score_kind, "SE3 target: surrogate or true");
  train_cmd->add_option("--weighting", tr.weighting, "Loss weighting: sigma2 or uniform");
  train_cmd->add_option("--width", tr.cfg.width, "Hidden width");
  train_cmd->add_option("--blocks", tr.cfg.blocks, "MLP blocks");
  train_cmd->add_option("--pose-freqs", tr.cfg.pose_freqs, "Positional frequencies for the pose");
  train_cmd->add_option("--time-freqs", tr.cfg.time_freqs, "Positional frequencies for the noise index");
  train_cmd->add_option("--embed-dim", tr.cfg.embed_dim, "Shape embedding size");
  train_cmd->add_option("--conditioning", tr.conditioning, "fourier or scale_bias");
  train_cmd->add_option("--log-every", tr.log_every, "Metrics interval (steps)");
  train_cmd->add_option("--ckpt-every", tr.ckpt_every, "Checkpoint interval (steps, 0 = final only)");
  train_cmd->add_option("--resume", tr.resume, "Checkpoint with optimizer state to continue from");

  SampleFlags sm;
  auto* sample_cmd = app.add_subcommand("sample", "Draw poses from a trained model");
  add_common(sample_cmd, common);
  sample_cmd->add_option("--checkpoint", sm.checkpoint, "Model checkpoint")->required();
  sample_cmd->add_option("--shape-id", sm.shape_id, "Shape index");
  sample_cmd->add_option("--n", sm.n, "Number of samples")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--data", sm.data, "Dataset whose record --gt-index sets the observation frame");
  sample_cmd->add_option("--gt-index", sm.gt_index, "Record index in --data");
  sample_cmd->add_option("--out", sm.out, "Output JSONL path");
  add_sampling(sample_cmd, sm.sampling);

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "Spread, translation error and mode coverage");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--data", ev.data, "Evaluation dataset")->required();
  eval_cmd->add_option("--samples", ev.samples, "Samples per shape")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--gts", ev.gts, "Ground truths per shape")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", ev.out, "Report path (JSONL)");
  add_sampling(eval_cmd, ev.sampling);

  AblateFlags ab;
  auto* ablate_cmd = app.add_subcommand("ablate-steps", "Re-sample a checkpoint with different step counts");
  add_common(ablate_cmd, common);
  ablate_cmd->add_option("--checkpoint", ab.eval.checkpoint, "Model checkpoint")->required();
  ablate_cmd->add_option("--data", ab.eval.data, "Evaluation dataset")->required();
  ablate_cmd->add_option("--steps", ab.steps, "Comma-separated step counts");
  ablate_cmd->add_option("--score-kind", ab.score_kind, "Label for the score_kind column");
  ablate_cmd->add_option("--samples", ab.eval.samples, "Samples per shape")->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--gts", ab.eval.gts, "Ground truths per shape")->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--eps0", ab.eval.sampling.eps0, "Langevin step scale")->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--out", ab.eval.out, "CSV path");

  VizFlags vz;
  auto* viz_cmd = app.add_subcommand("export-viz", "Export rotations as Mollweide-ready Euler angles");
  add_common(viz_cmd, common);
  viz_cmd->add_option("--samples", vz.samples_file, "Sample JSONL to convert");
  viz_cmd->add_option("--checkpoint", vz.sample.checkpoint, "Model checkpoint to sample from");
  viz_cmd->add_option("--shape-id", vz.sample.shape_id, "Shape index");
  viz_cmd->add_option("--n", vz.sample.n, "Number of samples")->check(CLI::PositiveNumber);
  viz_cmd->add_option("--data", vz.sample.data, "Dataset whose record --gt-index sets the observation frame");
  viz_cmd->add_option("--gt-index", vz.sample.gt_index, "Record index in --data");
  viz_cmd->add_option("--out", vz.sample.out, "CSV path");
  add_sampling(viz_cmd, vz.sample.sampling);

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::Success& e)
  {
    return app.exit(e);
  }
  catch (const CLI::ParseError& e)
  {
    app.exit(e);
    return kExitUsage;
  }

  try
  {
    if (verify->parsed())
      return run_verify(app, common, inject_fault, verify_out);
    if (gen_cmd->parsed())
      return run_gen(app, common, gen);
    if (train_cmd->parsed())
      return run_train(app, common, tr);
    if (sample_cmd->parsed())
      return run_sample(app, common, sm);
    if (eval_cmd->parsed())
      return run_eval(app, common, ev);
    if (ablate_cmd->parsed())
      return run_ablate(app, common, ab);
    if (viz_cmd->parsed())
      return run_viz(app, common, vz);
  }
  catch (const CLI::ValidationError& e)
  {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  }
  catch (const std::invalid_argument& e)
  {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  }
  catch (const std::exception& e)
  {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

int dispatch(const std::vector<std::string>& args)
{
  std::vector<const char*> argv;
  for (const std::string& a : args)
    argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace liediff
