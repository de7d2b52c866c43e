#include "nlsid/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nlsid/freqid.hpp"
#include "nlsid/ingest.hpp"
#include "nlsid/optim.hpp"
#include "nlsid/pnlss.hpp"
#include "nlsid/signals.hpp"
#include "nlsid/timeseries.hpp"
#include "nlsid/valid.hpp"
#include "nlsid/vdp.hpp"

namespace fs = std::filesystem;

namespace nlsid::cli {

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation("cannot hash missing file: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

namespace {

struct Context {
  nlohmann::json config;
  fs::path out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
};

nlohmann::json section(const Context& ctx, const std::string& name) {
  if (!ctx.config.contains(name))
    throw ContractViolation("config is missing the '" + name + "' section");
  return ctx.config.at(name);
}

template <typename T>
T field(const nlohmann::json& j, const std::string& key, std::optional<T> fallback = {}) {
  if (j.contains(key)) return j.at(key).get<T>();
  if (fallback) return *fallback;
  throw ContractViolation("config is missing field '" + key + "'");
}

// Stage provenance: inputs are checked against the hashes recorded by the
// stage that produced them.
void write_manifest(const Context& ctx, const std::string& stage,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  nlohmann::json in_hashes = nlohmann::json::object(), out_hashes = nlohmann::json::object();
  for (const std::string& p : inputs) in_hashes[p] = file_hash(p);
  for (const std::string& p : outputs) out_hashes[p] = file_hash(p);
  const nlohmann::json doc = {{"stage", stage},
                              {"seed", ctx.seed},
                              {"inputs", std::move(in_hashes)},
                              {"outputs", std::move(out_hashes)}};
  std::ofstream out(ctx.out_dir / (stage + "_manifest.json"));
  out << doc.dump(2) << '\n';
}

void check_inputs(const Context& ctx, const std::string& stage,
                  const std::string& producer_stage, const std::vector<std::string>& inputs) {
  for (const std::string& p : inputs)
    if (!fs::exists(p))
      throw ContractViolation(stage + ": required input missing: " + p);
  const fs::path manifest = ctx.out_dir / (producer_stage + "_manifest.json");
  if (!fs::exists(manifest)) return;  // externally supplied inputs are allowed
  std::ifstream in(manifest);
  const nlohmann::json doc = nlohmann::json::parse(in);
  const nlohmann::json& outputs = doc.at("outputs");
  for (const std::string& p : inputs) {
    if (!outputs.contains(p)) continue;
    if (outputs.at(p).get<std::string>() != file_hash(p))
      throw ContractViolation(stage + ": input hash mismatch (stale " + producer_stage +
                              " output): " + p);
  }
}

signals::MultisineSpec multisine_spec(const Context& ctx) {
  const nlohmann::json j = section(ctx, "excitation");
  signals::MultisineSpec spec;
  spec.f0 = field<double>(j, "f0");
  spec.n_lines = field<int>(j, "n_lines");
  spec.sample_rate = field<double>(j, "sample_rate");
  spec.n_periods = field<int>(j, "n_periods", 1);
  spec.n_realizations = field<int>(j, "n_realizations", 1);
  spec.rng_seed = ctx.seed;
  if (j.contains("amplitudes"))
    spec.amplitudes = j.at("amplitudes").get<std::vector<double>>();
  else
    spec.amplitudes.assign(static_cast<std::size_t>(spec.n_lines),
                           field<double>(j, "amplitude", 1.0));
  spec.validate();
  return spec;
}

vdp::VdpConfig vdp_config(const Context& ctx) {
  vdp::VdpConfig cfg;
  if (ctx.config.contains("vdp")) {
    const nlohmann::json j = ctx.config.at("vdp");
    cfg.mu = field<double>(j, "mu", cfg.mu);
    cfg.f_aut = field<double>(j, "f_aut", cfg.f_aut);
    cfg.integrator_step = field<double>(j, "integrator_step", cfg.integrator_step);
    cfg.output_sample_rate = field<double>(j, "output_sample_rate", cfg.output_sample_rate);
  }
  cfg.validate();
  return cfg;
}

std::string realization_stem(int m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "r%02d", m);
  return buf;
}

int cmd_excite(const Context& ctx) {
  const signals::MultisineSpec spec = multisine_spec(ctx);
  if (spec.n_realizations < 1) throw ContractViolation("excite: empty realization count");
  const std::vector<TimeSeries> disp = signals::generate_multisine(spec);
  const std::vector<TimeSeries> deriv = signals::generate_multisine_derivative(spec);
  std::vector<std::string> outputs;
  for (int m = 0; m < spec.n_realizations; ++m) {
    const std::string stem = (ctx.out_dir / ("excite_" + realization_stem(m))).string();
    save_timeseries_csv(disp[static_cast<std::size_t>(m)], stem + ".csv");
    save_timeseries_csv(deriv[static_cast<std::size_t>(m)], stem + "_deriv.csv");
    outputs.push_back(stem + ".csv");
    outputs.push_back(stem + "_deriv.csv");
  }
  write_manifest(ctx, "excite", {}, outputs);
  std::cout << "excite: wrote " << spec.n_realizations << " realizations\n";
  return 0;
}

// Analytic multisine derivative for the integrator; the sampled derivative
// files only become the model input channel.
std::function<double(double)> multisine_derivative_fn(const signals::MultisineSpec& spec,
                                                      int realization) {
  const std::vector<std::vector<double>> phases = signals::multisine_phases(spec);
  const std::vector<double> phi = phases[static_cast<std::size_t>(realization)];
  const std::vector<double> amps = spec.amplitudes;
  const double f0 = spec.f0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.n_lines));
  return [phi, amps, f0, scale](double t) {
    double v = 0.0;
    for (std::size_t n = 0; n < phi.size(); ++n) {
      const double w = 2.0 * std::numbers::pi * f0 * static_cast<double>(n + 1);
      v += amps[n] * w * std::cos(w * t + phi[n]);
    }
    return scale * v;
  };
}

int cmd_vdp(const Context& ctx) {
  const signals::MultisineSpec spec = multisine_spec(ctx);
  const vdp::VdpConfig cfg = vdp_config(ctx);
  std::vector<std::string> inputs, outputs;
  for (int m = 0; m < spec.n_realizations; ++m) {
    const std::string stem = (ctx.out_dir / ("excite_" + realization_stem(m))).string();
    inputs.push_back(stem + ".csv");
    inputs.push_back(stem + "_deriv.csv");
  }
  check_inputs(ctx, "vdp", "excite", inputs);
  for (int m = 0; m < spec.n_realizations; ++m) {
    const std::string stem = (ctx.out_dir / ("excite_" + realization_stem(m))).string();
    const TimeSeries disp = load_timeseries_csv(stem + ".csv");
    const TimeSeries deriv = load_timeseries_csv(stem + "_deriv.csv");
    const TimeSeries response =
        vdp::simulate_vdp(cfg, disp, {0.0, 0.0}, multisine_derivative_fn(spec, m));
    // Training record: input is the excitation derivative, output the
    // oscillator response.
    TimeSeries record = deriv;
    record.output = response.output;
    record.label = "vdp_" + realization_stem(m);
    const std::string out_path =
        (ctx.out_dir / ("response_" + realization_stem(m) + ".csv")).string();
    save_timeseries_csv(record, out_path);
    outputs.push_back(out_path);
  }
  write_manifest(ctx, "vdp", inputs, outputs);
  std::cout << "vdp: wrote " << spec.n_realizations << " response records\n";
  return 0;
}

int cmd_lockin(const Context& ctx) {
  const nlohmann::json j = section(ctx, "lockin");
  const vdp::VdpConfig cfg = vdp_config(ctx);
  const auto rel_freqs = field<std::vector<double>>(j, "rel_freqs");
  const auto amplitudes = field<std::vector<double>>(j, "amplitudes");
  const double settle = field<double>(j, "settle_time", 20.0);
  const double observe = field<double>(j, "observe_time", 20.0);
  const double tolerance = field<double>(j, "tolerance", 1e-2);
  const vdp::LockinGrid grid =
      vdp::map_lockin(cfg, rel_freqs, amplitudes, settle, observe, tolerance);
  const std::string out_path = (ctx.out_dir / "lockin.csv").string();
  vdp::save_lockin_csv(grid, out_path);
  write_manifest(ctx, "lockin", {}, {out_path});
  std::cout << "lockin: wrote " << out_path << '\n';
  return 0;
}

std::vector<std::string> response_paths(const Context& ctx) {
  const signals::MultisineSpec spec = multisine_spec(ctx);
  std::vector<std::string> paths;
  for (int m = 0; m < spec.n_realizations; ++m)
    paths.push_back((ctx.out_dir / ("response_" + realization_stem(m) + ".csv")).string());
  return paths;
}

int cmd_bla(const Context& ctx) {
  const nlohmann::json j = section(ctx, "bla");
  const int discard = field<int>(j, "discard_periods", 1);
  const int n_lines = field<int>(j, "n_excited_lines");
  const std::vector<std::string> paths = response_paths(ctx);
  check_inputs(ctx, "bla", "vdp", paths);
  std::vector<TimeSeries> records;
  for (const std::string& p : paths)
    records.push_back(
        signals::remove_transient_periods(load_timeseries_csv(p), static_cast<std::size_t>(discard)));
  const freqid::FrfEstimate frf = freqid::estimate_bla(records, n_lines);
  const std::string out_path = (ctx.out_dir / "bla.csv").string();
  freqid::save_frf_csv(frf, out_path);
  write_manifest(ctx, "bla", paths, {out_path});
  std::cout << "bla: " << frf.size() << " lines, " << frf.suspicious_variance_lines()
            << " suspicious variance lines\n";
  return 0;
}

int cmd_fit_linear(const Context& ctx) {
  const nlohmann::json j = section(ctx, "fit_linear");
  const nlohmann::json pj = section(ctx, "pnlss");
  const std::string frf_path = (ctx.out_dir / "bla.csv").string();
  check_inputs(ctx, "fit-linear", "bla", {frf_path});
  const freqid::FrfEstimate frf = freqid::load_frf_csv(frf_path);

  std::vector<std::string> outputs;
  if (j.contains("scan_orders")) {
    const auto orders = j.at("scan_orders").get<std::vector<int>>();
    const auto scan = freqid::scan_model_order(
        frf, orders,
        field<std::string>(j, "kind", std::string("rational")) == "fir" ? freqid::FitKind::Fir
                                                                        : freqid::FitKind::Rational);
    const std::string scan_path = (ctx.out_dir / "order_scan.csv").string();
    std::ofstream scan_out(scan_path);
    scan_out << "order,cost\n";
    scan_out.precision(17);
    for (const auto& [order, c] : scan) scan_out << order << ',' << c << '\n';
    outputs.push_back(scan_path);
  }

  LinearSsModel linear;
  if (field<std::string>(j, "kind", std::string("rational")) == "fir") {
    linear = freqid::fit_fir(frf, field<int>(j, "n_taps"));
  } else {
    const int n_den = field<int>(j, "n_den");
    linear = freqid::fit_rational(frf, field<int>(j, "n_num", n_den), n_den,
                                  field<int>(j, "sk_iters", 10));
  }
  const pnlss::PnlssModel model =
      pnlss::from_linear(linear, field<std::vector<int>>(pj, "state_degrees"),
                         field<std::vector<int>>(pj, "output_degrees"));
  const std::string model_path = (ctx.out_dir / "linear_model.json").string();
  pnlss::save_model(model, model_path);
  outputs.push_back(model_path);
  write_manifest(ctx, "fit-linear", {frf_path}, outputs);
  std::cout << "fit-linear: order " << model.order() << ", " << model.parameter_count()
            << " parameters\n";
  return 0;
}

int cmd_train(const Context& ctx) {
  const nlohmann::json j = section(ctx, "training");
  const std::string init_path = (ctx.out_dir / "linear_model.json").string();
  std::vector<std::string> paths = response_paths(ctx);
  if (j.contains("records")) paths = j.at("records").get<std::vector<std::string>>();
  std::vector<std::string> inputs = paths;
  inputs.push_back(init_path);
  check_inputs(ctx, "train", "fit-linear", {init_path});
  check_inputs(ctx, "train", "vdp", paths);

  optim::TrainConfig cfg;
  cfg.max_outer_iterations = field<int>(j, "max_outer_iterations", 20);
  cfg.lm_steps_per_run = field<int>(j, "lm_steps_per_run", 1000);
  cfg.probe_steps = field<int>(j, "probe_steps", 100);
  cfg.stop_tolerance = field<double>(j, "stop_tolerance", 0.0);
  cfg.rng_seed = ctx.seed;
  cfg.threads = ctx.threads;
  const int use_periods = field<int>(j, "use_periods", 0);  // 0: full records

  std::vector<TimeSeries> data;
  for (const std::string& p : paths) {
    TimeSeries ts = load_timeseries_csv(p);
    if (use_periods > 0 && ts.is_periodic() &&
        static_cast<std::size_t>(use_periods) < ts.n_periods) {
      ts.input.resize(ts.period_length * static_cast<std::size_t>(use_periods));
      ts.output.resize(ts.input.size());
      ts.n_periods = static_cast<std::size_t>(use_periods);
    }
    data.push_back(std::move(ts));
  }
  std::vector<pnlss::SimulationState> inits;
  pnlss::PnlssModel start = pnlss::load_model(init_path);
  for (std::size_t i = 0; i < data.size(); ++i)
    inits.push_back(pnlss::SimulationState::zero(start.order()));

  const std::string ckpt_model = (ctx.out_dir / "train_checkpoint_model.json").string();
  const std::string ckpt_report = (ctx.out_dir / "train_checkpoint_report.json").string();
  optim::OptReport prior;
  bool resumed = false;
  if (field<bool>(j, "resume", false) && fs::exists(ckpt_model) && fs::exists(ckpt_report)) {
    start = pnlss::load_model(ckpt_model);
    std::ifstream in(ckpt_report);
    std::stringstream ss;
    ss << in.rdbuf();
    prior = optim::report_from_json(ss.str());
    cfg.max_outer_iterations -= static_cast<int>(prior.iterations.size());
    if (cfg.max_outer_iterations < 1) cfg.max_outer_iterations = 1;
    resumed = true;
    std::cout << "train: resuming after " << prior.iterations.size() << " iterations\n";
  }

  auto merge = [&](optim::OptReport report) {
    if (!resumed) return report;
    optim::OptReport merged = prior;
    for (optim::OptIteration it : report.iterations) {
      it.iteration += static_cast<int>(prior.iterations.size());
      merged.iterations.push_back(std::move(it));
    }
    merged.wall_time_seconds += report.wall_time_seconds;
    return merged;
  };
  auto checkpoint = [&](const pnlss::PnlssModel& model, const optim::OptReport& report) {
    pnlss::save_model(model, ckpt_model);
    std::ofstream out(ckpt_report);
    out << optim::report_to_json(merge(report)) << '\n';
  };

  auto [trained, report] = optim::train(start, data, inits, cfg, checkpoint);
  const optim::OptReport full = merge(report);

  const std::string model_path = (ctx.out_dir / "trained_model.json").string();
  const std::string report_path = (ctx.out_dir / "train_report.json").string();
  pnlss::save_model(trained, model_path);
  std::ofstream rep(report_path);
  rep << optim::report_to_json(full) << '\n';
  rep.close();
  write_manifest(ctx, "train", inputs, {model_path, report_path});
  const double final_e =
      full.iterations.empty() ? full.initial_e_rms : full.iterations.back().e_rms;
  std::cout << "train: " << full.iterations.size() << " adopted iterations, e_rms "
            << final_e << '\n';
  return 0;
}

int cmd_simulate(const Context& ctx, const std::string& model_path,
                 const std::string& data_path, std::string output_path) {
  check_inputs(ctx, "simulate", "train", {model_path});
  if (!fs::exists(data_path))
    throw ContractViolation("simulate: data record missing: " + data_path);
  const pnlss::PnlssModel model = pnlss::load_model(model_path);
  const TimeSeries record = load_timeseries_csv(data_path);
  const TimeSeries simulated =
      pnlss::simulate(model, record, pnlss::SimulationState::zero(model.order()));
  if (output_path.empty())
    output_path =
        (ctx.out_dir / ("simulated_" + fs::path(data_path).stem().string() + ".csv")).string();
  save_timeseries_csv(simulated, output_path);
  write_manifest(ctx, "simulate", {model_path, data_path}, {output_path});
  std::cout << "simulate: wrote " << output_path << '\n';
  return 0;
}

int cmd_validate(const Context& ctx) {
  const nlohmann::json j = section(ctx, "validation");
  const std::string model_path = (ctx.out_dir / "trained_model.json").string();
  check_inputs(ctx, "validate", "train", {model_path});
  const pnlss::PnlssModel model = pnlss::load_model(model_path);
  const vdp::VdpConfig vcfg = vdp_config(ctx);

  valid::SuiteConfig cfg;
  cfg.f_ref = field<double>(j, "f_ref", vcfg.f_aut);
  cfg.sample_rate = field<double>(j, "sample_rate", vcfg.output_sample_rate);
  cfg.ramp_duration = field<double>(j, "ramp_duration", 8.0);
  cfg.hold_duration = field<double>(j, "hold_duration", 20.0);
  cfg.estimate_u0 = field<bool>(j, "estimate_u0", false);

  std::vector<std::pair<double, double>> experiments;
  for (double rf : field<std::vector<double>>(j, "rel_freqs"))
    for (double a : field<std::vector<double>>(j, "amplitudes")) experiments.emplace_back(rf, a);

  const std::string truth_dir = field<std::string>(j, "truth_dir", std::string());
  valid::TruthSource truth;
  if (!truth_dir.empty()) {
    // Externally supplied truth records (e.g. CFD exports), matched by label.
    truth = [&](const TimeSeries& excitation, double, double) {
      const std::string p = truth_dir + "/" + excitation.label + ".csv";
      if (!fs::exists(p)) throw ContractViolation("validate: missing truth record " + p);
      TimeSeries ts = ingest::load_external_csv(p, excitation.sample_rate);
      if (!ts.has_output()) {
        ts.output = ts.input;  // single-channel truth export
        ts.input.assign(ts.size(), 0.0);
      }
      if (ts.size() > excitation.size()) {
        ts.input.resize(excitation.size());
        ts.output.resize(excitation.size());
      }
      return ts;
    };
  } else {
    truth = [&](const TimeSeries& excitation, double rel_freq, double amplitude) {
      const double f_ex = rel_freq * cfg.f_ref;
      TimeSeries disp = signals::generate_ramped_sine(f_ex, amplitude, cfg.ramp_duration,
                                                      cfg.hold_duration, cfg.sample_rate);
      auto deriv = [f_ex, amplitude, ramp = cfg.ramp_duration](double t) {
        const double phase = signals::ramped_sine_phase(f_ex, ramp, t);
        const double f_inst = t < ramp ? f_ex * t / ramp : f_ex;
        return amplitude * 2.0 * std::numbers::pi * f_inst * std::cos(phase);
      };
      TimeSeries response = vdp::simulate_vdp(vcfg, disp, {0.0, 0.0}, deriv);
      TimeSeries out = excitation;
      out.output = response.output;
      return out;
    };
  }

  const valid::ValidationReport report = valid::run_validation_suite(model, experiments, truth, cfg);
  const std::string csv_path = (ctx.out_dir / "validation.csv").string();
  const std::string json_path = (ctx.out_dir / "validation.json").string();
  valid::save_report_csv(report, csv_path);
  std::ofstream out(json_path);
  out << valid::report_to_json(report) << '\n';
  out.close();
  write_manifest(ctx, "validate", {model_path}, {csv_path, json_path});
  std::cout << "validate: mean e_rms " << report.mean_e_rms << " over "
            << report.experiments.size() << " experiments\n";
  return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"PNLSS system-identification pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // accept --config/--out/... after the subcommand name

  std::string config_path, out_dir = "out";
  std::int64_t seed_flag = -1;
  int threads = 1;
  app.add_option("--config", config_path, "pipeline config JSON");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed_flag, "rng seed (overrides the config)");
  app.add_option("--threads", threads, "worker threads for training");

  CLI::App* simulate = nullptr;
  std::string sim_model, sim_data, sim_output;
  for (const char* name :
       {"excite", "vdp", "lockin", "bla", "fit-linear", "train", "validate"})
    app.add_subcommand(name);
  simulate = app.add_subcommand("simulate");
  simulate->add_option("--model", sim_model)->required();
  simulate->add_option("--data", sim_data)->required();
  simulate->add_option("--output", sim_output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    Context ctx;
    ctx.out_dir = out_dir;
    ctx.threads = std::max(threads, 1);
    fs::create_directories(ctx.out_dir);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ContractViolation("cannot open config: " + config_path);
      ctx.config = nlohmann::json::parse(in);
    } else {
      ctx.config = nlohmann::json::object();
    }
    ctx.seed = seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag)
                              : ctx.config.value("rng_seed", std::uint64_t{0});

    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "excite") return cmd_excite(ctx);
    if (sub == "vdp") return cmd_vdp(ctx);
    if (sub == "lockin") return cmd_lockin(ctx);
    if (sub == "bla") return cmd_bla(ctx);
    if (sub == "fit-linear") return cmd_fit_linear(ctx);
    if (sub == "train") return cmd_train(ctx);
    if (sub == "simulate") return cmd_simulate(ctx, sim_model, sim_data, sim_output);
    if (sub == "validate") return cmd_validate(ctx);
    throw ContractViolation("unknown subcommand: " + sub);
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace nlsid::cli
