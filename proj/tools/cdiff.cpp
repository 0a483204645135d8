// SPDX-License-Identifier: Apache-2.0
// cdiff: generate data, train, sample and evaluate constrained diffusion models.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdiff/cdiff.hpp"

namespace fs = std::filesystem;
using namespace cdiff;

namespace {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  Json domain_doc = {{"preset", "hypercube"}, {"dim", 2}};
  Method method = Method::reflected;
  NoiseSchedule schedule;
  TrainConfig train = TrainConfig::desk();
  std::size_t hidden_layers = 3;
  std::size_t width = 128;
  double delta = default_delta;
  std::size_t data_n = 10000;
  std::optional<Json> mixture_doc;
  std::size_t sample_n = 10000;
  std::vector<double> lambda0 = {1.0};
  double psi = 0.0;
  std::optional<double> bandwidth;
  std::optional<std::size_t> eval_m;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string output_dir;
};

Json mixture_to_json(const MixtureSpec& m) {
  Json comps = Json::array();
  for (const auto& c : m.components) comps.push_back({{"weight", c.weight}, {"center", vec_to_json(c.center)}});
  return {{"components", comps}, {"sigma2", m.sigma2}};
}

MixtureSpec mixture_from_json(const Json& j) {
  MixtureSpec m;
  try {
    for (const auto& c : j.at("components")) m.components.push_back({c.value("weight", 1.0), vec_from_json(c.at("center"))});
    m.sigma2 = j.value("sigma2", 0.25);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::config_error, std::string("mixture: ") + e.what());
  }
  return m;
}

Json to_json(const RunConfig& c) {
  Json j = {{"domain", c.domain_doc},
            {"method", to_string(c.method)},
            {"schedule", schedule_to_json(c.schedule)},
            {"train", train_config_to_json(c.train)},
            {"network", {{"hidden_layers", c.hidden_layers}, {"width", c.width}, {"delta", c.delta}}},
            {"data", {{"n", c.data_n}}},
            {"sample", {{"n", c.sample_n}, {"lambda0", c.lambda0}, {"psi", c.psi}}},
            {"eval", {{"bandwidth", c.bandwidth ? Json(*c.bandwidth) : Json("median")},
                      {"m", c.eval_m ? Json(*c.eval_m) : Json(nullptr)}}},
            {"seed", c.seed},
            {"workers", c.workers},
            {"output_dir", c.output_dir}};
  if (c.mixture_doc) j["data"]["mixture"] = *c.mixture_doc;
  return j;
}

Json load_domain_doc(const Json& j, const fs::path& base) {
  if (j.is_string()) {
    fs::path p = j.get<std::string>();
    if (p.is_relative()) p = base / p;
    return read_json_file(p.string());
  }
  return j;
}

void apply_config_file(RunConfig& c, const std::string& path) {
  const Json j = read_json_file(path);
  const fs::path base = fs::path(path).parent_path();
  try {
    if (j.contains("domain")) c.domain_doc = load_domain_doc(j.at("domain"), base);
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"));
    if (j.contains("train")) {
      const Json& t = j.at("train");
      TrainConfig start = t.value("profile", std::string("desk")) == "paper" ? TrainConfig{} : TrainConfig::desk();
      c.train = train_config_from_json(t, start);
    }
    if (j.contains("network")) {
      const Json& n = j.at("network");
      c.hidden_layers = n.value("hidden_layers", c.hidden_layers);
      c.width = n.value("width", c.width);
      c.delta = n.value("delta", c.delta);
    }
    if (j.contains("data")) {
      const Json& d = j.at("data");
      c.data_n = d.value("n", c.data_n);
      if (d.contains("mixture")) c.mixture_doc = d.at("mixture");
    }
    if (j.contains("sample")) {
      const Json& s = j.at("sample");
      c.sample_n = s.value("n", c.sample_n);
      if (s.contains("lambda0")) {
        c.lambda0 = s.at("lambda0").is_array() ? s.at("lambda0").get<std::vector<double>>()
                                               : std::vector<double>{s.at("lambda0").get<double>()};
      }
      c.psi = s.value("psi", c.psi);
    }
    if (j.contains("eval") && j.at("eval").contains("m") && !j.at("eval").at("m").is_null()) {
      c.eval_m = j.at("eval").at("m").get<std::size_t>();
    }
    if (j.contains("eval") && j.at("eval").contains("bandwidth")) {
      const Json& b = j.at("eval").at("bandwidth");
      if (b.is_number()) {
        c.bandwidth = b.get<double>();
      } else if (b != "median") {
        throw Error(ErrorKind::config_error, "eval.bandwidth must be a number or \"median\"");
      }
    }
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::config_error, path + ": " + e.what());
  }
}

std::uint64_t parse_seed(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::config_error, std::string(what) + " must be a non-negative integer, got '" + text + "'");
  }
}

/// Flags common to every subcommand; unset flags leave the config alone.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string domain;
  std::string method;
  std::optional<double> horizon;
  std::optional<std::size_t> steps;
  std::optional<double> beta_min;
  std::optional<double> beta_max;
  std::optional<std::string> output_dir;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "random seed (overrides CDIFF_SEED and the config)");
    app->add_option("--workers", workers, "worker threads; 1 gives bit-reproducible output")->check(CLI::PositiveNumber);
    app->add_option("--domain", domain, "domain document: a JSON file or inline JSON");
    app->add_option("--method", method, "barrier or reflected")->check(CLI::IsMember({"barrier", "reflected"}));
    app->add_option("--T", horizon, "time horizon");
    app->add_option("--N", steps, "number of discretisation steps");
    app->add_option("--beta-min", beta_min, "noise rate at t = 0");
    app->add_option("--beta-max", beta_max, "noise rate at t = T");
    app->add_option("--output-dir", output_dir, "directory for relative output paths");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config.empty()) apply_config_file(c, config);
    if (const char* env = std::getenv("CDIFF_SEED"); env && *env) c.seed = parse_seed(env, "CDIFF_SEED");
    if (seed) c.seed = *seed;
    if (workers) c.workers = *workers;
    if (!domain.empty()) {
      try {
        c.domain_doc = domain.front() == '{' ? Json::parse(domain) : read_json_file(domain);
      } catch (const Json::exception& e) {
        throw Error(ErrorKind::config_error, std::string("--domain: ") + e.what());
      }
    }
    if (!method.empty()) c.method = method_from_string(method);
    if (horizon || steps || beta_min || beta_max) {
      c.schedule = NoiseSchedule(horizon.value_or(c.schedule.horizon()), steps.value_or(c.schedule.steps()),
                                 beta_min.value_or(c.schedule.beta_min()), beta_max.value_or(c.schedule.beta_max()));
    }
    if (output_dir) c.output_dir = *output_dir;
    c.train.seed = c.seed;
    c.train.workers = c.workers;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

/// Relative output paths land in the configured output directory.
std::string output_path(const RunConfig& cfg, const std::string& path) {
  if (cfg.output_dir.empty() || path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(cfg.output_dir) / path).string();
}

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

void write_manifest(const std::string& command, const RunConfig& cfg, const std::vector<std::string>& outputs,
                    const Json& extra = Json::object()) {
  Json config = to_json(cfg);
  for (const auto& [k, v] : extra.items()) config[k] = v;
  const Json m = make_manifest(command, config, cfg.seed, cfg.workers, outputs);
  for (const auto& out : outputs) write_json_file(manifest_path(out), m);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string with_suffix(const std::string& path, const std::string& suffix, const std::string& ext) {
  const fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + ext)).string();
}

std::string format_lambda(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void print_summary(const Samples& x) {
  std::cout << "n = " << x.cols() << ", d = " << x.rows() << '\n';
  if (x.cols() == 0) return;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::cout << "  x" << i << ": mean " << format_double(x.row(i).mean()) << ", min "
              << format_double(x.row(i).minCoeff()) << ", max " << format_double(x.row(i).maxCoeff()) << '\n';
  }
}

MixtureSpec default_mixture(const RunConfig& cfg, const DomainSpec& domain) {
  if (cfg.mixture_doc) return mixture_from_json(*cfg.mixture_doc);
  const std::string preset = cfg.domain_doc.value("preset", std::string());
  if (domain.periodic_dims() == 0) {
    if (preset == "hypercube") return hypercube_mixture(domain.dimension());
    if (preset == "simplex") return simplex_mixture(domain.dimension());
  }
  Vec center(static_cast<Eigen::Index>(domain.dimension()));
  center.head(static_cast<Eigen::Index>(domain.constrained_dims())) = interior_point(domain.constrained());
  center.tail(static_cast<Eigen::Index>(domain.periodic_dims())).setConstant(std::numbers::pi);
  return {{{1.0, center}}, 0.01};
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct GenDataFlags {
  CommonFlags common;
  std::optional<std::size_t> n;
  std::string out = "data.csv";
};

void cmd_gen_data(const GenDataFlags& f) {
  RunConfig cfg = f.common.resolve();
  if (f.n) cfg.data_n = *f.n;
  const DomainSpec domain = domain_from_json(cfg.domain_doc);
  const MixtureSpec mixture = default_mixture(cfg, domain);
  cfg.mixture_doc = mixture_to_json(mixture);
  const Samples x = make_synthetic_dataset(domain, mixture, cfg.data_n, RandomStreams(cfg.seed), cfg.workers);
  const std::string out = output_path(cfg, f.out);
  ensure_parent(out);
  write_samples_csv(out, x);
  write_manifest("gen-data", cfg, {out});
  std::cout << "wrote " << out << '\n';
  print_summary(x);
}

struct TrainFlags {
  CommonFlags common;
  std::string data;
  std::string out = "model.ckpt";
  std::string loss_csv;
  std::string profile;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> warmup;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  bool quiet = false;
};

void cmd_train(const TrainFlags& f) {
  RunConfig cfg = f.common.resolve();
  if (f.profile == "paper") {
    const TrainConfig keep = cfg.train;
    cfg.train = TrainConfig{};
    cfg.train.seed = keep.seed;
    cfg.train.workers = keep.workers;
  } else if (f.profile == "desk") {
    cfg.train.total_iters = TrainConfig::desk().total_iters;
  }
  if (f.iters) cfg.train.total_iters = *f.iters;
  if (f.warmup) cfg.train.warmup_iters = *f.warmup;
  if (f.batch) cfg.train.batch_size = *f.batch;
  if (f.lr) cfg.train.peak_lr = *f.lr;
  validate(cfg.train);

  const DomainSpec domain = domain_from_json(cfg.domain_doc);
  require_method_supported(cfg.method, domain);
  const Samples data = read_samples_csv(f.data);
  if (static_cast<std::size_t>(data.rows()) != domain.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "dataset has " + std::to_string(data.rows()) +
                                                   " coordinates but the domain has " +
                                                   std::to_string(domain.dimension()));
  }
  Rng init(RandomStreams(cfg.seed).child(0xc0ffee).seed());
  Checkpoint ckpt;
  ckpt.model = make_score_model(domain, cfg.schedule.horizon(), cfg.hidden_layers, cfg.width, cfg.delta, init);
  ckpt.method = cfg.method;
  ckpt.schedule = cfg.schedule;
  ckpt.train = cfg.train;

  const std::size_t report = std::max<std::size_t>(1, cfg.train.total_iters / 20);
  const auto history = train(ckpt.model, data, cfg.method, cfg.schedule, cfg.train, [&](const TrainRecord& r) {
    if (!f.quiet && (r.iteration + 1) % report == 0) {
      std::cerr << "iter " << r.iteration + 1 << '/' << cfg.train.total_iters << "  loss " << r.loss << "  lr "
                << r.lr << '\n';
    }
  });
  ckpt.iteration = history.size();

  const std::string out = output_path(cfg, f.out);
  const std::string loss_path = f.loss_csv.empty() ? with_suffix(out, ".loss", ".csv") : output_path(cfg, f.loss_csv);
  ensure_parent(out);
  ensure_parent(loss_path);
  save_checkpoint(out, ckpt);
  std::ofstream os(loss_path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io_error, "cannot write " + loss_path);
  os << "iteration,loss,lr\n";
  for (const auto& r : history) os << r.iteration << ',' << format_double(r.loss) << ',' << format_double(r.lr) << '\n';
  os.close();
  write_manifest("train", cfg, {out, loss_path}, {{"data_file", f.data}});
  std::cout << "wrote " << out << " and " << loss_path << " (" << history.size() << " iterations";
  if (!history.empty()) std::cout << ", final loss " << format_double(history.back().loss);
  std::cout << ")\n";
}

struct SampleFlags {
  CommonFlags common;
  std::string checkpoint;
  std::optional<std::size_t> n;
  std::vector<double> lambda0;
  std::optional<double> psi;
  std::string out = "samples.csv";
};

void cmd_sample(const SampleFlags& f) {
  RunConfig cfg = f.common.resolve();
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  // the checkpoint's domain, method and schedule apply unless overridden
  const bool domain_given = !f.common.domain.empty() || (!f.common.config.empty() &&
                                                          read_json_file(f.common.config).contains("domain"));
  if (!domain_given) cfg.domain_doc = domain_to_json(ckpt.model.domain);
  if (f.common.method.empty()) cfg.method = ckpt.method;
  if (!(f.common.horizon || f.common.steps || f.common.beta_min || f.common.beta_max)) cfg.schedule = ckpt.schedule;
  if (f.n) cfg.sample_n = *f.n;
  if (!f.lambda0.empty()) cfg.lambda0 = f.lambda0;
  if (f.psi) cfg.psi = *f.psi;
  if (cfg.lambda0.empty()) throw Error(ErrorKind::config_error, "--lambda0 needs at least one value");

  const DomainSpec domain = domain_from_json(cfg.domain_doc);
  const std::string out = output_path(cfg, f.out);
  std::vector<std::string> outputs;
  for (double lambda0 : cfg.lambda0) {
    const LowTempConfig lowtemp{lambda0, cfg.psi};
    validate(lowtemp);
    const Samples x =
        backward_sample(ckpt.model, cfg.method, domain, cfg.schedule, cfg.sample_n, lowtemp, RandomStreams(cfg.seed), cfg.workers);
    const std::string path =
        cfg.lambda0.size() == 1 ? out : with_suffix(out, "_lambda" + format_lambda(lambda0), fs::path(out).extension().string());
    ensure_parent(path);
    write_samples_csv(path, x);
    outputs.push_back(path);
    std::cout << "wrote " << path << " (lambda0 = " << format_lambda(lambda0) << ", psi = " << format_lambda(cfg.psi)
              << ")\n";
  }
  write_manifest("sample", cfg, outputs,
                 {{"checkpoint", f.checkpoint}, {"model_domain_hash", domain_hash(ckpt.model.domain)}});
}

struct EvalFlags {
  CommonFlags common;
  std::string x;
  std::string y;
  bool split = false;
  std::string bandwidth;
  std::optional<std::size_t> m;
  std::string out = "metrics.json";
  std::string histogram;
  std::size_t bins = 50;
};

void cmd_eval(const EvalFlags& f) {
  RunConfig cfg = f.common.resolve();
  if (!f.bandwidth.empty()) {
    if (f.bandwidth == "median") {
      cfg.bandwidth.reset();
    } else {
      try {
        cfg.bandwidth = std::stod(f.bandwidth);
      } catch (const std::exception&) {
        throw Error(ErrorKind::config_error, "--bandwidth must be a number or 'median'");
      }
    }
  }
  Samples a = read_samples_csv(f.x);
  Samples b;
  if (f.split) {
    if (!f.y.empty()) throw Error(ErrorKind::config_error, "--split takes a single sample file");
    const Eigen::Index half = a.cols() / 2;
    b = a.rightCols(a.cols() - half);
    a = Samples(a.leftCols(half));
  } else {
    if (f.y.empty()) throw Error(ErrorKind::config_error, "eval needs --y or --split");
    b = read_samples_csv(f.y);
  }
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::dimension_mismatch, "sample files have " + std::to_string(a.rows()) + " and " +
                                                   std::to_string(b.rows()) + " coordinates");
  }
  if (f.m) cfg.eval_m = *f.m;
  if (cfg.eval_m) {
    const auto m = static_cast<Eigen::Index>(*cfg.eval_m);
    a = Samples(a.leftCols(std::min(a.cols(), m)));
    b = Samples(b.leftCols(std::min(b.cols(), m)));
  }
  const KernelSpec kernel = cfg.bandwidth ? KernelSpec::fixed(*cfg.bandwidth) : KernelSpec::median_heuristic();
  if (a.cols() < 2 || b.cols() < 2) throw Error(ErrorKind::insufficient_samples, "MMD needs at least 2 samples each");
  const double sigma = resolve_bandwidth(kernel, a, b);
  const double value = mmd2(a, b, sigma, cfg.workers);
  const Json report = {{"mmd2", value},
                       {"kernel",
                        {{"type", "rbf"},
                         {"bandwidth", sigma},
                         {"selection", cfg.bandwidth ? "fixed" : "median-heuristic"}}},
                       {"m", a.cols()},
                       {"n", b.cols()},
                       {"seed", cfg.seed},
                       {"x", f.x},
                       {"y", f.split ? f.x + " (second half)" : f.y}};
  const std::string out = output_path(cfg, f.out);
  ensure_parent(out);
  write_json_file(out, report);
  std::vector<std::string> outputs = {out};
  if (!f.histogram.empty()) {
    const std::string hist_path = output_path(cfg, f.histogram);
    std::vector<double> lo(static_cast<std::size_t>(a.rows())), hi(lo.size());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      lo[static_cast<std::size_t>(i)] = std::min(a.row(i).minCoeff(), b.row(i).minCoeff());
      hi[static_cast<std::size_t>(i)] = std::max(a.row(i).maxCoeff(), b.row(i).maxCoeff());
      if (!(hi[static_cast<std::size_t>(i)] > lo[static_cast<std::size_t>(i)])) hi[static_cast<std::size_t>(i)] += 1.0;
    }
    const Histogram h = histogram(a, f.bins, lo, hi);
    ensure_parent(hist_path);
    std::ofstream os(hist_path, std::ios::binary);
    if (!os) throw Error(ErrorKind::io_error, "cannot write " + hist_path);
    write_histogram_csv(os, h);
    outputs.push_back(hist_path);
    if (a.rows() == 2) {
      const std::string joint = with_suffix(hist_path, "_joint", ".csv");
      std::ofstream js(joint, std::ios::binary);
      if (!js) throw Error(ErrorKind::io_error, "cannot write " + joint);
      write_joint_histogram_csv(js, h);
      outputs.push_back(joint);
    }
  }
  write_manifest("eval", cfg, outputs, {{"x", f.x}, {"y", f.y}, {"split", f.split}});
  std::cout << report.dump(2) << '\n';
}

struct ForwardVizFlags {
  CommonFlags common;
  std::vector<double> x0;
  std::string out = "forward.csv";
};

void cmd_forward_viz(ForwardVizFlags f) {
  if (f.common.domain.empty() && f.common.config.empty()) f.common.domain = R"({"preset":"interval"})";
  RunConfig cfg = f.common.resolve();
  const DomainSpec domain = domain_from_json(cfg.domain_doc);
  if (domain.periodic_dims() > 0) throw Error(ErrorKind::unsupported_domain, "forward-viz needs a domain without periodic coordinates");
  const ConstraintSet& set = domain.constrained();
  require_polytope(set);
  const auto d = static_cast<Eigen::Index>(domain.dimension());
  Vec start = f.x0.empty() ? Vec(interior_point(set)) : Eigen::Map<const Vec>(f.x0.data(), static_cast<Eigen::Index>(f.x0.size()));
  if (start.size() != d) throw Error(ErrorKind::dimension_mismatch, "--x0 has the wrong number of coordinates");
  if (!is_interior(start, set)) throw Error(ErrorKind::infeasible_point, "--x0 must lie strictly inside the domain");

  const NoiseSchedule& sched = cfg.schedule;
  const double gamma = sched.step_size();
  Rng rng = RandomStreams(cfg.seed).stream(0);
  Vec free = start, barrier = start, reflected = start;
  const std::string out = output_path(cfg, f.out);
  ensure_parent(out);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw Error(ErrorKind::io_error, "cannot write " + out);
  os << "t";
  for (const char* name : {"unconstrained", "barrier", "reflected"}) {
    for (Eigen::Index i = 0; i < d; ++i) os << ',' << name << "_x" << i;
  }
  os << '\n';
  auto emit = [&](double t) {
    os << format_double(t);
    for (const Vec* x : {&free, &barrier, &reflected}) {
      for (Eigen::Index i = 0; i < d; ++i) os << ',' << format_double((*x)(i));
    }
    os << '\n';
  };
  emit(0.0);
  std::size_t exits = 0;
  for (std::size_t k = 0; k < sched.steps(); ++k) {
    const double t = static_cast<double>(k) * gamma;
    const double beta = sched.beta(t);
    const Vec z = rng.normal_vector(d);
    free += std::sqrt(gamma * beta) * z;
    barrier = barrier_forward_step(barrier, t, sched, z, set);
    reflected = reflected_step(reflected, std::sqrt(gamma * beta) * z, domain).endpoint;
    if (!is_inside_closed(free, set)) ++exits;
    emit(t + gamma);
  }
  os.close();
  write_manifest("forward-viz", cfg, {out}, {{"x0", vec_to_json(start)}});
  std::cout << "wrote " << out << " (" << sched.steps() + 1 << " rows; unconstrained path outside the domain on "
            << exits << " steps)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion models on constrained domains: log-barrier and reflected processes.\n"
               "Exit codes: 0 success, 2 configuration error, 3 numerical failure.\n"
               "Seed precedence: --seed, then CDIFF_SEED, then the config file."};
  app.set_version_flag("--version", std::string(cdiff::version));
  app.require_subcommand(1);

  GenDataFlags gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "write a synthetic wrapped-normal mixture dataset (CSV)");
  gen.common.attach(gen_cmd);
  gen_cmd->add_option("-n,--n", gen.n, "number of samples");
  gen_cmd->add_option("-o,--out", gen.out, "output CSV")->capture_default_str();

  TrainFlags tr;
  CLI::App* train_cmd = app.add_subcommand("train", "fit a score model by implicit score matching");
  tr.common.attach(train_cmd);
  train_cmd->add_option("-d,--data", tr.data, "training dataset CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("-o,--out", tr.out, "checkpoint path")->capture_default_str();
  train_cmd->add_option("--loss-csv", tr.loss_csv, "loss curve CSV (default: <out stem>.loss.csv)");
  train_cmd->add_option("--profile", tr.profile, "desk (20k iterations) or paper (100k)")
      ->check(CLI::IsMember({"desk", "paper"}));
  train_cmd->add_option("--iters", tr.iters, "total iterations");
  train_cmd->add_option("--warmup", tr.warmup, "warmup iterations");
  train_cmd->add_option("--batch", tr.batch, "batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.lr, "peak learning rate");
  train_cmd->add_flag("-q,--quiet", tr.quiet, "no progress output");

  SampleFlags sm;
  CLI::App* sample_cmd = app.add_subcommand("sample", "draw samples by integrating the reverse process");
  sm.common.attach(sample_cmd);
  sample_cmd->add_option("-k,--checkpoint", sm.checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("-n,--n", sm.n, "number of samples");
  sample_cmd->add_option("--lambda0", sm.lambda0, "low-temperature lambda0 values (one output file each)")
      ->delimiter(',');
  sample_cmd->add_option("--psi", sm.psi, "low-temperature psi");
  sample_cmd->add_option("-o,--out", sm.out, "output CSV")->capture_default_str();

  EvalFlags ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "MMD^2 between two sample files (JSON report)");
  ev.common.attach(eval_cmd);
  eval_cmd->add_option("-x,--x", ev.x, "first sample CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("-y,--y", ev.y, "second sample CSV")->check(CLI::ExistingFile);
  eval_cmd->add_flag("--split", ev.split, "compare the two halves of --x");
  eval_cmd->add_option("--bandwidth", ev.bandwidth, "RBF bandwidth or 'median' (default)");
  eval_cmd->add_option("-m,--m", ev.m, "use at most m samples from each file");
  eval_cmd->add_option("-o,--out", ev.out, "metrics JSON")->capture_default_str();
  eval_cmd->add_option("--histogram", ev.histogram, "also write histograms of --x to this CSV");
  eval_cmd->add_option("--bins", ev.bins, "histogram bins")->capture_default_str()->check(CLI::PositiveNumber);

  ForwardVizFlags fv;
  CLI::App* viz_cmd =
      app.add_subcommand("forward-viz", "unconstrained, barrier and reflected paths driven by the same noise (CSV)");
  fv.common.attach(viz_cmd);
  viz_cmd->add_option("--x0", fv.x0, "start point (default: domain interior point)")->delimiter(',');
  viz_cmd->add_option("-o,--out", fv.out, "output CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) cmd_gen_data(gen);
    if (*train_cmd) cmd_train(tr);
    if (*sample_cmd) cmd_sample(sm);
    if (*eval_cmd) cmd_eval(ev);
    if (*viz_cmd) cmd_forward_viz(fv);
  } catch (const Error& e) {
    std::cerr << "cdiff: " << e.what() << '\n';
    return is_numerical(e.kind()) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "cdiff: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
