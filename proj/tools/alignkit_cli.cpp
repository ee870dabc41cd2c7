#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "alignkit/baseflow.hpp"
#include "alignkit/experiments.hpp"
#include "alignkit/io.hpp"
#include "alignkit/metrics.hpp"
#include "alignkit/parallel.hpp"
#include "alignkit/pipeline.hpp"
#include "alignkit/rectify.hpp"
#include "alignkit/synthdata.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace alignkit;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void emit(const json& report, const std::string& out) {
  const std::string text = report.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(out);
  os << text;
  if (!os) throw IoError("cannot write report to " + out);
}

std::string frame_file(int i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d.%s", i, ext);
  return buf;
}

json flow_config_json(const FlowEstimatorConfig& c) {
  return {{"levels", c.levels}, {"iters_per_level", c.iters_per_level}, {"window", c.window},
          {"match_photometry", c.match_photometry}};
}

const char* objective_name(FitObjective o) {
  switch (o) {
    case FitObjective::Epe: return "epe";
    case FitObjective::MaskedL1: return "masked_l1";
    case FitObjective::Mse: return "mse";
  }
  return "unknown";
}

json fit_config_json(const FitConfig& c) {
  return {{"budget", c.budget},         {"step", c.step},   {"calibration", c.calibration},
          {"perturbation", c.perturbation}, {"alpha", c.alpha}, {"gamma", c.gamma},
          {"stability", c.stability},   {"seed", c.seed},
          {"objective", objective_name(c.objective)}};
}

json fit_result_json(const FitResult& r) {
  return {{"initial_loss", r.initial_loss}, {"best_loss", r.best_loss}, {"evaluations", r.evaluations},
          {"trace", r.trace}};
}

json report_json(const MetricReport& m) {
  return {{"experiment", m.experiment}, {"psnr", m.psnr},           {"ssim", m.ssim},
          {"mean_psnr", m.mean_psnr},   {"mean_ssim", m.mean_ssim}, {"wall_seconds", m.wall_seconds}};
}

// Pre-crop LR extent whose focal crop keeps exactly `size` pixels.
int source_lr_extent(int size, const DegradeParams& d) {
  const int guess = static_cast<int>(std::lround(size / d.focal_crop));
  for (int delta = 0; delta <= 4; ++delta) {
    for (int cand : {guess - delta, guess + delta}) {
      if (cand >= size && cropped_lr_extent(cand * d.scale, d) == size) return cand;
    }
  }
  throw InvalidArgument("synth: no source extent crops to " + std::to_string(size) + " pixels");
}

struct SynthOpts {
  std::uint64_t seed = 0;
  int frames = 8;
  int size = 64;
  int scale = 4;
  double focal_crop = 0.58;
  std::vector<double> velocity{1.0, 0.5};
  double jitter = 0.0;
  std::vector<float> misalign{0.0f, 0.0f};
  std::vector<float> gain{1.0f, 1.0f, 1.0f};
  std::vector<float> offset{0.0f, 0.0f, 0.0f};
  double blur = 0.0;
  double noise = 0.0;
  std::string out;
};

json run_synth(const SynthOpts& o) {
  const auto t0 = Clock::now();
  DegradeParams d;
  d.focal_crop = o.focal_crop;
  d.scale = o.scale;
  d.blur_sigma = o.blur;
  d.noise_sigma = o.noise;
  std::copy(o.gain.begin(), o.gain.end(), d.gain.begin());
  std::copy(o.offset.begin(), o.offset.end(), d.offset.begin());
  std::copy(o.misalign.begin(), o.misalign.end(), d.misalign.begin());
  d.quantize = true;
  d.seed = o.seed;
  d.validate();
  if (o.size < 16) throw InvalidArgument("synth: --size must be >= 16");

  SceneParams sp;
  sp.seed = o.seed;
  sp.height = sp.width = source_lr_extent(o.size, d) * o.scale;
  sp.frames = o.frames;
  // Motion is given in LR pixels per frame.
  sp.velocity = {o.velocity[0] * o.scale, o.velocity[1] * o.scale};
  sp.jitter = o.jitter * o.scale;
  sp.min_period = 4.0 * o.scale;
  sp.max_period = 24.0 * o.scale;
  const PairedSequence seq = degrade(make_scene(sp), d);
  write_dataset(seq, o.out);
  return {{"command", "synth"},
          {"config",
           {{"seed", o.seed},           {"frames", o.frames},   {"size", o.size},
            {"scale", o.scale},         {"focal_crop", o.focal_crop}, {"velocity", o.velocity},
            {"jitter", o.jitter},       {"misalign", o.misalign}, {"gain", o.gain},
            {"offset", o.offset},       {"blur", o.blur},        {"noise", o.noise},
            {"out", o.out},             {"scene_extent", sp.height}}},
          {"dataset",
           {{"dir", o.out},
            {"frames", seq.lr.size()},
            {"lr_size", {seq.lr[0].height(), seq.lr[0].width()}},
            {"hr_size", {seq.hr[0].height(), seq.hr[0].width()}}}},
          {"wall_seconds", seconds_since(t0)}};
}

struct AlignEvalOpts {
  std::string dir;
  bool ablate = false;
  std::vector<float> bias{0.0f, 0.0f};
  int budget = 2000;
  std::uint64_t seed = 1;
  int groups = 1;
  int margin = 8;
};

json run_align_eval(const AlignEvalOpts& o) {
  const auto t0 = Clock::now();
  const PairedSequence seq = read_dataset(o.dir);
  AlignBenchConfig cfg;
  cfg.bias = {o.bias[0], o.bias[1]};
  cfg.seed = o.seed;
  cfg.margin = o.margin;
  cfg.align.groups = o.groups;
  cfg.resflow_fit.budget = cfg.deform_fit.budget = o.budget;
  cfg.resflow_fit.seed = o.seed;
  cfg.deform_fit.seed = o.seed + 1;
  const std::vector<AlignPair> pairs = pairs_from_dataset(seq, cfg);
  if (pairs.empty()) throw InvalidArgument("align-eval: dataset needs at least two frames");

  json config = {{"dir", o.dir},       {"ablate", o.ablate}, {"bias", o.bias},
                 {"seed", o.seed},     {"groups", o.groups}, {"margin", o.margin},
                 {"flow", flow_config_json(cfg.align.flow)},
                 {"predictor_hidden", cfg.predictor_hidden}, {"levels", cfg.align.levels}};
  json report = {{"command", "align-eval"}, {"pairs", pairs.size()}};
  if (!o.ablate) {
    AlignBenchConfig base = cfg;
    base.align.use_resflow = base.align.use_deform = false;
    const AlignWeights w = make_bench_weights(base);
    report["rows"] = json::array({{{"name", "base"},
                                   {"epe", refined_epe(pairs, w, base)},
                                   {"align_error", alignment_error(pairs, w, base.align, cfg.margin)}}});
  } else {
    config["fit"] = fit_config_json(cfg.resflow_fit);
    // Fit on the first half of the pairs, score on the rest.
    const std::size_t split = pairs.size() == 1 ? 1 : pairs.size() / 2;
    const std::vector<AlignPair> train(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(split));
    const std::vector<AlignPair> test =
        pairs.size() == 1 ? pairs : std::vector<AlignPair>(pairs.begin() + static_cast<std::ptrdiff_t>(split), pairs.end());
    const AblationReport rep = run_alignment_ablation(train, test, cfg);
    json rows = json::array();
    for (const AblationRow& r : rep.rows) {
      rows.push_back({{"name", r.name}, {"resflow", r.resflow}, {"deform", r.deform},
                      {"epe", r.epe}, {"align_error", r.align_error}});
    }
    report["rows"] = rows;
    report["train_pairs"] = train.size();
    report["test_pairs"] = test.size();
    report["resflow_fit"] = fit_result_json(rep.resflow_fit);
    report["deform_fit"] = fit_result_json(rep.deform_fit);
  }
  report["config"] = config;
  report["wall_seconds"] = seconds_since(t0);
  return report;
}

struct RectifyOpts {
  std::string dir;
  std::string write;
};

json run_rectify(const RectifyOpts& o) {
  const auto t0 = Clock::now();
  const PairedSequence seq = read_dataset(o.dir);
  const RectifyReport rep = run_rectify_experiment(seq);
  const RectifyOptions opt;
  json frames = json::array();
  if (!o.write.empty()) {
    fs::create_directories(fs::path(o.write) / "target");
    fs::create_directories(fs::path(o.write) / "mask");
    fs::create_directories(fs::path(o.write) / "flow");
  }
  for (std::size_t t = 0; t < seq.lr.size(); ++t) {
    const RectifiedTarget r = rectify_target(seq.lr[t], seq.hr[t], seq.params.scale, opt);
    frames.push_back({{"frame", t},
                      {"before", masked_l1(seq.hr[t], seq.targets[t], r.mask)},
                      {"after", masked_l1(r.y_w, seq.targets[t], r.mask)},
                      {"masked_fraction", 1.0 - mean(r.mask)},
                      {"low_texture", r.low_texture}});
    if (!o.write.empty()) {
      const fs::path base(o.write);
      save_vten(base / "target" / frame_file(static_cast<int>(t), "vten"), r.y_w);
      save_image(base / "mask" / frame_file(static_cast<int>(t), "pgm"), r.mask);
      save_vten(base / "flow" / frame_file(static_cast<int>(t), "vten"), r.flow.tensor());
    }
  }
  json rows = json::array();
  for (const RectifyRow& r : rep.rows) {
    rows.push_back({{"name", r.name}, {"color", r.color}, {"position", r.position}, {"masked_l1", r.masked_l1}});
  }
  if (!o.write.empty()) {
    std::ofstream os(fs::path(o.write) / "manifest.json");
    os << json{{"frames", seq.lr.size()}, {"scale", seq.params.scale}, {"layout", {"target/%04d.vten", "mask/%04d.pgm", "flow/%04d.vten"}}}.dump(2) << '\n';
  }
  return {{"command", "rectify"},
          {"config",
           {{"dir", o.dir},
            {"write", o.write},
            {"guided_filter", {{"radius", opt.color_params.radius}, {"eps", opt.color_params.eps}}},
            {"flow", flow_config_json(opt.flow)}}},
          {"rows", rows},
          {"ratio", rep.ratio},
          {"frames", frames},
          {"wall_seconds", seconds_since(t0)}};
}

struct SrOpts {
  std::string dir;
  std::string weights;
  std::string init = "zero";
  std::uint64_t seed = 0;
  int scale = 4;
  std::string frames_dir;
  std::string save_weights;
};

json run_sr(const SrOpts& o) {
  const auto t0 = Clock::now();
  const PairedSequence seq = read_dataset(o.dir);
  PipelineWeights w;
  if (!o.weights.empty()) {
    w = load_pipeline_weights(o.weights);
  } else if (o.init == "zero") {
    w = make_zero_pipeline_weights();
  } else if (o.init == "random") {
    w = make_random_pipeline_weights(o.seed);
  } else {
    throw InvalidArgument("sr: --init must be zero or random");
  }
  if (!o.save_weights.empty()) save_pipeline_weights(o.save_weights, w);
  const std::vector<Tensor> out = vsr_forward(seq.lr, o.scale, w);
  const std::string frames_dir = o.frames_dir.empty() ? (fs::path(o.dir) / "sr").string() : o.frames_dir;
  fs::create_directories(frames_dir);
  for (std::size_t t = 0; t < out.size(); ++t) {
    save_image(fs::path(frames_dir) / frame_file(static_cast<int>(t), "ppm"), out[t]);
  }
  json report = {{"command", "sr"},
                 {"config",
                  {{"dir", o.dir},         {"weights", o.weights}, {"init", o.weights.empty() ? o.init : "archive"},
                   {"seed", o.seed},       {"scale", o.scale},     {"frames_dir", frames_dir},
                   {"threads", worker_count()},
                   {"align", {{"levels", w.align_config.levels}, {"groups", w.align_config.groups},
                              {"resflow", w.align_config.use_resflow}, {"deform", w.align_config.use_deform},
                              {"flow", flow_config_json(w.align_config.flow)}}}}},
                 {"frames", out.size()},
                 {"output_size", {out[0].height(), out[0].width()}}};
  if (o.scale == seq.params.scale) {
    MetricReport m = evaluate_frames(out, seq.targets, "sr");
    m.wall_seconds = seconds_since(t0);
    report["metrics"] = report_json(m);
  } else {
    report["metrics"] = nullptr;
    report["metrics_skipped"] = "scale differs from the dataset's";
  }
  report["wall_seconds"] = seconds_since(t0);
  return report;
}

struct FitOpts {
  std::string dir;
  std::string stage = "resflow";
  std::string objective;  // empty: epe for resflow, mse for deform
  int budget = 2000;
  std::uint64_t seed = 1;
  std::vector<float> bias{2.0f, 0.0f};
  int pairs = 6;
  std::string save;
};

json run_fit(const FitOpts& o) {
  const auto t0 = Clock::now();
  AlignBenchConfig cfg;
  cfg.bias = {o.bias[0], o.bias[1]};
  cfg.seed = o.seed;
  if (o.stage != "resflow" && o.stage != "deform") throw InvalidArgument("fit: --stage must be resflow or deform");
  const bool resflow = o.stage == "resflow";
  FitConfig fc = resflow ? FitConfig{} : default_deform_fit();
  fc.budget = o.budget;
  fc.seed = o.seed;
  if (o.objective == "epe") {
    fc.objective = FitObjective::Epe;
  } else if (o.objective == "masked_l1") {
    fc.objective = FitObjective::MaskedL1;
  } else if (o.objective == "mse") {
    fc.objective = FitObjective::Mse;
  } else if (!o.objective.empty()) {
    throw InvalidArgument("fit: --objective must be epe, masked_l1 or mse");
  }
  if (!resflow && fc.objective == FitObjective::Epe) {
    throw InvalidArgument("fit: the deform stage needs --objective masked_l1 or mse");
  }
  const std::vector<AlignPair> pairs =
      o.dir.empty() ? make_align_pairs(cfg, o.pairs, 0) : pairs_from_dataset(read_dataset(o.dir), cfg);
  if (pairs.empty()) throw InvalidArgument("fit: no alignment pairs");

  AlignWeights w = make_bench_weights(cfg);
  AlignBenchConfig eval = cfg;
  eval.align.use_deform = !resflow;
  const double epe_before = refined_epe(pairs, w, eval);
  ParameterView view = alignment_parameters(w, cfg.scope, resflow, !resflow);
  auto objective = [&] {
    switch (fc.objective) {
      case FitObjective::Epe: return refined_epe(pairs, w, eval);
      case FitObjective::Mse: return alignment_mse(pairs, w, eval.align, cfg.margin);
      default: return alignment_error(pairs, w, eval.align, cfg.margin);
    }
  };
  const FitResult r = fit_predictors(objective, view, fc);
  if (!o.save.empty()) {
    TensorArchive ar;
    for (auto& [name, layer] : named_layers(w, "align")) {
      ar.put(name + ".weight", layer->weight);
      ar.put(name + ".bias", layer->bias);
    }
    ar.save(o.save);
  }
  return {{"command", "fit"},
          {"config",
           {{"dir", o.dir}, {"stage", o.stage}, {"pairs", pairs.size()}, {"bias", o.bias},
            {"parameters", view.size()}, {"fit", fit_config_json(fc)}, {"save", o.save}}},
          {"result", fit_result_json(r)},
          {"epe_before", epe_before},
          {"epe_after", refined_epe(pairs, w, eval)},
          {"wall_seconds", seconds_since(t0)}};
}

json run_gradcheck_cmd(int points, std::uint64_t seed, double tolerance) {
  const GradcheckReport r = run_gradcheck(points, seed);
  return {{"command", "gradcheck"},
          {"config", {{"points", points}, {"seed", seed}, {"tolerance", tolerance}}},
          {"warp_max_rel_error", r.warp_max_rel_error},
          {"deform_max_rel_error", r.deform_max_rel_error},
          {"passed", r.warp_max_rel_error <= tolerance && r.deform_max_rel_error <= tolerance},
          {"wall_seconds", r.seconds}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alignkit: alignment and super-resolution experiments"};
  app.require_subcommand(1);
  std::string out;

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
  synth->add_option("--seed", so.seed);
  synth->add_option("--frames", so.frames)->check(CLI::PositiveNumber);
  synth->add_option("--size", so.size, "LR frame size after the focal crop");
  synth->add_option("--scale", so.scale)->check(CLI::IsMember({2, 4}));
  synth->add_option("--focal-crop", so.focal_crop);
  synth->add_option("--velocity", so.velocity, "vx vy in LR px per frame")->expected(2);
  synth->add_option("--jitter", so.jitter, "per-frame jitter std-dev, LR px");
  synth->add_option("--misalign", so.misalign, "HR content shift dx dy, HR px")->expected(2);
  synth->add_option("--gain", so.gain, "LR per-channel gain")->expected(3);
  synth->add_option("--offset", so.offset, "LR per-channel offset")->expected(3);
  synth->add_option("--blur", so.blur);
  synth->add_option("--noise", so.noise);
  synth->add_option("--out", so.out, "dataset directory")->required();
  synth->add_option("--report", out, "write the JSON report here instead of stdout");

  AlignEvalOpts ao;
  auto* align_eval = app.add_subcommand("align-eval", "flow and alignment errors over a dataset");
  align_eval->add_option("dir", ao.dir)->required();
  align_eval->add_flag("--ablate", ao.ablate, "fit and compare base, +resflow, +resflow+deform");
  align_eval->add_option("--bias", ao.bias, "bias injected into the base flow")->expected(2);
  align_eval->add_option("--budget", ao.budget);
  align_eval->add_option("--seed", ao.seed);
  align_eval->add_option("--groups", ao.groups)->check(CLI::IsMember({1, 3}));
  align_eval->add_option("--margin", ao.margin);
  align_eval->add_option("--out", out);

  RectifyOpts ro;
  auto* rectify = app.add_subcommand("rectify", "rectify HR targets of a dataset");
  rectify->add_option("dir", ro.dir)->required();
  rectify->add_option("--write", ro.write, "directory for rectified targets, masks and flows");
  rectify->add_option("--out", out);

  SrOpts sro;
  auto* sr = app.add_subcommand("sr", "run the super-resolution network over a dataset");
  sr->add_option("dir", sro.dir)->required();
  sr->add_option("--weights", sro.weights, "weight archive directory");
  sr->add_option("--init", sro.init, "zero or random, when no archive is given");
  sr->add_option("--seed", sro.seed);
  sr->add_option("--scale", sro.scale)->check(CLI::IsMember({2, 4}));
  sr->add_option("--frames-dir", sro.frames_dir);
  sr->add_option("--save-weights", sro.save_weights);
  sr->add_option("--out", out);

  FitOpts fo;
  auto* fit = app.add_subcommand("fit", "fit alignment heads with SPSA");
  fit->add_option("dir", fo.dir, "dataset (default: synthetic translation pairs)");
  fit->add_option("--stage", fo.stage, "resflow or deform");
  fit->add_option("--objective", fo.objective, "epe, masked_l1 or mse (default: epe for resflow, mse for deform)");
  fit->add_option("--budget", fo.budget)->check(CLI::PositiveNumber);
  fit->add_option("--seed", fo.seed);
  fit->add_option("--bias", fo.bias)->expected(2);
  fit->add_option("--pairs", fo.pairs)->check(CLI::PositiveNumber);
  fit->add_option("--save", fo.save, "write the fitted alignment weights here");
  fit->add_option("--out", out);

  int gc_points = 100;
  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-3;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite differences against analytic derivatives");
  gradcheck->add_option("--points", gc_points);
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--tolerance", gc_tol);
  gradcheck->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    json report;
    if (*synth) report = run_synth(so);
    else if (*align_eval) report = run_align_eval(ao);
    else if (*rectify) report = run_rectify(ro);
    else if (*sr) report = run_sr(sro);
    else if (*fit) report = run_fit(fo);
    else report = run_gradcheck_cmd(gc_points, gc_seed, gc_tol);
    emit(report, out);
    return 0;
  } catch (const std::exception& e) {
    const json err = {{"error", {{"command", app.get_subcommands().front()->get_name()}, {"message", e.what()}}}};
    std::cerr << err.dump() << '\n';
    return 1;
  }
}
