#include "nlsid/optim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace nlsid::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SubsetNameEntry {
  Subset subset;
  const char* name;
};

constexpr SubsetNameEntry kSubsetNames[] = {
    {Subset::Diagonal, "diagonal"},
    {Subset::InputOnly, "input-only"},
    {Subset::StateAffine, "state-affine"},
    {Subset::NoCrossProducts, "no-cross-products"},
    {Subset::FullStateAffine, "full-state-affine"},
    {Subset::DegreeUpTo3, "degree-up-to-3"},
    {Subset::StatesOnly, "states-only"},
    {Subset::OddDegrees, "odd-degrees"},
    {Subset::AllExceptDc, "all-except-dc"},
    {Subset::All, "all"},
};

}  // namespace

const char* subset_name(Subset s) {
  for (const auto& e : kSubsetNames)
    if (e.subset == s) return e.name;
  throw std::invalid_argument("unknown subset");
}

Subset subset_from_name(const std::string& name) {
  for (const auto& e : kSubsetNames)
    if (name == e.name) return e.subset;
  throw std::invalid_argument("unknown subset name: " + name);
}

std::vector<int> select_columns(Subset choice, const pnlss::MonomialBasis& basis,
                                bool state_equation) {
  if (choice == Subset::Diagonal && !state_equation)
    throw std::invalid_argument("diagonal subset is only valid for the state equation");

  std::vector<int> cols;
  for (std::size_t c = 0; c < basis.size(); ++c) {
    const std::vector<int>& ex = basis.exponents[c];
    const int n_x = basis.n_states;
    const int k = ex[static_cast<std::size_t>(n_x)];  // input exponent
    int degree = k;
    int nonzero_states = 0;
    int max_state_exp = 0;
    int nonzero_vars = k > 0 ? 1 : 0;
    for (int i = 0; i < n_x; ++i) {
      degree += ex[static_cast<std::size_t>(i)];
      if (ex[static_cast<std::size_t>(i)] > 0) {
        ++nonzero_states;
        ++nonzero_vars;
        max_state_exp = std::max(max_state_exp, ex[static_cast<std::size_t>(i)]);
      }
    }

    bool take = false;
    switch (choice) {
      case Subset::Diagonal:
        take = nonzero_states == 1 && k == 0;
        break;
      case Subset::InputOnly:
        take = nonzero_states == 0 && k > 0;
        break;
      case Subset::StateAffine:
        take = nonzero_states == 1 && max_state_exp == 1;
        break;
      case Subset::NoCrossProducts:
        take = nonzero_vars == 1;
        break;
      case Subset::FullStateAffine:
        take = nonzero_states == 0 || (nonzero_states == 1 && max_state_exp == 1);
        break;
      case Subset::DegreeUpTo3:
        take = degree <= 3;
        break;
      case Subset::StatesOnly:
        take = k == 0 && degree > 0;
        break;
      case Subset::OddDegrees:
        take = degree % 2 == 1;
        break;
      case Subset::AllExceptDc:
        take = degree > 0;
        break;
      case Subset::All:
        take = true;
        break;
    }
    if (take) cols.push_back(static_cast<int>(c));
  }
  return cols;
}

SubsetMask make_subset(Subset state_choice, Subset output_choice,
                       const pnlss::MonomialBasis& state_basis,
                       const pnlss::MonomialBasis& output_basis) {
  SubsetMask mask;
  mask.state_choice = state_choice;
  mask.output_choice = output_choice;
  mask.e_columns = select_columns(state_choice, state_basis, true);
  mask.f_columns = select_columns(output_choice, output_basis, false);
  return mask;
}

void TrainConfig::validate() const {
  if (max_outer_iterations < 1 || lm_steps_per_run < 1 || probe_steps < 1 || threads < 1)
    throw std::invalid_argument("TrainConfig: counts must be positive");
  if (lm_lambda_init <= 0.0) throw std::invalid_argument("TrainConfig: lambda_init must be > 0");
  if (lm_lambda_up <= 1.0 || lm_lambda_down >= 1.0 || lm_lambda_down <= 0.0)
    throw std::invalid_argument("TrainConfig: need lambda_up > 1 and 0 < lambda_down < 1");
  if (stop_tolerance < 0.0) throw std::invalid_argument("TrainConfig: negative stop tolerance");
}

namespace {

void check_data(const std::vector<TimeSeries>& data,
                const std::vector<pnlss::SimulationState>& inits) {
  if (data.empty()) throw std::invalid_argument("no training records");
  if (data.size() != inits.size())
    throw std::invalid_argument("one initial state per record required");
  for (const TimeSeries& r : data)
    if (!r.has_output()) throw std::invalid_argument("training record without output");
}

// Sum of squared errors and reference energy over all records; infinite on
// divergence.
std::pair<double, double> error_energy(const pnlss::PnlssModel& model,
                                       const std::vector<TimeSeries>& data,
                                       const std::vector<pnlss::SimulationState>& inits) {
  double sse = 0.0, ref = 0.0;
  std::vector<double> y;
  for (std::size_t r = 0; r < data.size(); ++r) {
    y.resize(data[r].size());
    if (!pnlss::simulate_into(model, data[r].input.data(), data[r].size(), inits[r], y.data()))
      return {kInf, kInf};
    for (std::size_t t = 0; t < y.size(); ++t) {
      const double e = data[r].output[t] - y[t];
      sse += e * e;
      ref += data[r].output[t] * data[r].output[t];
    }
  }
  return {sse, ref};
}

int masked_count(const pnlss::PnlssModel& model, const SubsetMask& mask) {
  const int n_x = model.order();
  return n_x * n_x + 2 * n_x + 1 + n_x * static_cast<int>(mask.e_columns.size()) +
         static_cast<int>(mask.f_columns.size());
}

Eigen::VectorXd masked_params(const pnlss::PnlssModel& model, const SubsetMask& mask) {
  const int n_x = model.order();
  Eigen::VectorXd theta(masked_count(model, mask));
  int p = 0;
  for (int j = 0; j < n_x; ++j)
    for (int i = 0; i < n_x; ++i) theta(p++) = model.linear.a(i, j);
  for (int i = 0; i < n_x; ++i) theta(p++) = model.linear.b(i);
  for (int j = 0; j < n_x; ++j) theta(p++) = model.linear.c(j);
  theta(p++) = model.linear.d;
  for (int c : mask.e_columns)
    for (int i = 0; i < n_x; ++i) theta(p++) = model.e(i, c);
  for (int c : mask.f_columns) theta(p++) = model.f(0, c);
  return theta;
}

void apply_masked_params(pnlss::PnlssModel& model, const SubsetMask& mask,
                         const Eigen::VectorXd& theta) {
  const int n_x = model.order();
  int p = 0;
  for (int j = 0; j < n_x; ++j)
    for (int i = 0; i < n_x; ++i) model.linear.a(i, j) = theta(p++);
  for (int i = 0; i < n_x; ++i) model.linear.b(i) = theta(p++);
  for (int j = 0; j < n_x; ++j) model.linear.c(j) = theta(p++);
  model.linear.d = theta(p++);
  for (int c : mask.e_columns)
    for (int i = 0; i < n_x; ++i) model.e(i, c) = theta(p++);
  for (int c : mask.f_columns) model.f(0, c) = theta(p++);
}

// Fills one record's Jacobian block and, when y_model is nonnull, the
// simulated output. State sensitivities follow
//   S(t+1) = (A + E dzeta/dx) S(t) + direct terms,   S(0) = 0,
// with the direct terms placed at the masked parameter positions.
void record_jacobian(const pnlss::PnlssModel& model, const TimeSeries& data,
                     const pnlss::SimulationState& init, const SubsetMask& mask,
                     Eigen::Ref<Eigen::MatrixXd> j_block, double* y_model) {
  const int n_x = model.order();
  const std::size_t n = data.size();
  const int n_p = static_cast<int>(j_block.cols());
  const int off_b = n_x * n_x;
  const int off_c = off_b + n_x;
  const int off_d = off_c + n_x;
  const int off_e = off_d + 1;
  const int off_f = off_e + n_x * static_cast<int>(mask.e_columns.size());

  Eigen::VectorXd x = init.x0;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n_x, n_p);
  Eigen::VectorXd zeta, eta;
  Eigen::MatrixXd zeta_jac, eta_jac;
  Eigen::MatrixXd s_next(n_x, n_p);
  Eigen::RowVectorXd out_row(n_p);

  for (std::size_t t = 0; t < n; ++t) {
    const double u = data.input[t];
    const double u_mono = (t == 0 && init.u0) ? *init.u0 : u;
    model.state_basis.evaluate(x, u_mono, zeta);
    model.state_basis.state_jacobian(x, u_mono, zeta_jac);
    model.output_basis.evaluate(x, u_mono, eta);
    model.output_basis.state_jacobian(x, u_mono, eta_jac);

    // Output row: (C + F dEta/dx) S + direct C, D, F terms.
    Eigen::RowVectorXd cy = model.linear.c;
    if (model.output_basis.size() > 0) cy += model.f * eta_jac;
    out_row.noalias() = cy * s;
    for (int j = 0; j < n_x; ++j) out_row(off_c + j) += x(j);
    out_row(off_d) += u;
    for (std::size_t sidx = 0; sidx < mask.f_columns.size(); ++sidx)
      out_row(off_f + static_cast<int>(sidx)) += eta(mask.f_columns[sidx]);
    j_block.row(static_cast<Eigen::Index>(t)) = out_row;

    if (y_model) {
      double y = model.linear.c.dot(x) + model.linear.d * u;
      for (Eigen::Index c = 0; c < eta.size(); ++c) y += model.f(0, c) * eta(c);
      y_model[t] = y;
    }

    // State sensitivity propagation.
    Eigen::MatrixXd prop = model.linear.a;
    if (model.state_basis.size() > 0) prop += model.e * zeta_jac;
    s_next.noalias() = prop * s;
    for (int j = 0; j < n_x; ++j)
      for (int i = 0; i < n_x; ++i) s_next(i, j * n_x + i) += x(j);
    for (int i = 0; i < n_x; ++i) s_next(i, off_b + i) += u;
    for (std::size_t sidx = 0; sidx < mask.e_columns.size(); ++sidx) {
      const double z = zeta(mask.e_columns[sidx]);
      for (int i = 0; i < n_x; ++i) s_next(i, off_e + static_cast<int>(sidx) * n_x + i) += z;
    }
    s.swap(s_next);

    // State update.
    Eigen::VectorXd x_next = model.linear.a * x + model.linear.b * u;
    if (model.state_basis.size() > 0) x_next += model.e * zeta;
    x.swap(x_next);
    for (int i = 0; i < n_x; ++i)
      if (!std::isfinite(x(i)) || std::abs(x(i)) > 1e12) throw pnlss::DivergenceError(t + 1);
  }
}

// Stacked Jacobian and residual (data - model) over all records.
void assemble(const pnlss::PnlssModel& model, const std::vector<TimeSeries>& data,
              const std::vector<pnlss::SimulationState>& inits, const SubsetMask& mask,
              Eigen::MatrixXd& j, Eigen::VectorXd& r) {
  std::size_t total = 0;
  for (const TimeSeries& d : data) total += d.size();
  const int n_p = masked_count(model, mask);
  j.resize(static_cast<Eigen::Index>(total), n_p);
  r.resize(static_cast<Eigen::Index>(total));
  std::vector<double> y;
  std::size_t row = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t n = data[i].size();
    y.resize(n);
    record_jacobian(model, data[i], inits[i], mask,
                    j.middleRows(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(n)),
                    y.data());
    for (std::size_t t = 0; t < n; ++t)
      r(static_cast<Eigen::Index>(row + t)) = data[i].output[t] - y[t];
    row += n;
  }
}

}  // namespace

double cost(const pnlss::PnlssModel& model, const std::vector<TimeSeries>& data,
            const std::vector<pnlss::SimulationState>& inits) {
  check_data(data, inits);
  return error_energy(model, data, inits).first;
}

double relative_rms(const pnlss::PnlssModel& model, const std::vector<TimeSeries>& data,
                    const std::vector<pnlss::SimulationState>& inits) {
  check_data(data, inits);
  const auto [sse, ref] = error_energy(model, data, inits);
  if (ref <= 0.0) throw std::invalid_argument("relative_rms: zero reference energy");
  return std::sqrt(sse / ref);
}

Eigen::MatrixXd jacobian(const pnlss::PnlssModel& model, const TimeSeries& data,
                         const pnlss::SimulationState& init, const SubsetMask& mask) {
  model.validate();
  Eigen::MatrixXd j(static_cast<Eigen::Index>(data.size()), masked_count(model, mask));
  record_jacobian(model, data, init, mask, j, nullptr);
  return j;
}

LmResult lm_minimize(const pnlss::PnlssModel& model, const std::vector<TimeSeries>& data,
                     const std::vector<pnlss::SimulationState>& inits, const SubsetMask& mask,
                     const TrainConfig& config, int n_steps) {
  check_data(data, inits);
  LmResult result{model, {}};
  double best_cost = cost(model, data, inits);
  result.cost_trace.push_back(best_cost);
  if (!std::isfinite(best_cost)) return result;

  Eigen::VectorXd theta = masked_params(model, mask);
  pnlss::PnlssModel work = model;

  Eigen::MatrixXd j;
  Eigen::VectorXd r;
  assemble(result.model, data, inits, mask, j, r);
  Eigen::MatrixXd h = j.transpose() * j;
  Eigen::VectorXd g = j.transpose() * r;
  double lambda = config.lm_lambda_init * std::max(h.diagonal().mean(), 1e-300);

  for (int step = 0; step < n_steps; ++step) {
    if (g.norm() <= 1e-14 * (1.0 + best_cost)) break;
    Eigen::MatrixXd damped = h;
    damped.diagonal().array() += lambda;
    const Eigen::VectorXd delta = damped.ldlt().solve(g);
    if (!delta.allFinite()) {
      lambda *= config.lm_lambda_up;
      continue;
    }
    const Eigen::VectorXd cand = theta + delta;
    apply_masked_params(work, mask, cand);
    const double c = cost(work, data, inits);
    if (c < best_cost) {
      theta = cand;
      best_cost = c;
      result.model = work;
      result.cost_trace.push_back(c);
      lambda *= config.lm_lambda_down;
      try {
        assemble(result.model, data, inits, mask, j, r);
      } catch (const pnlss::DivergenceError&) {
        break;  // accepted model still simulates (cost was finite); defensive
      }
      h.noalias() = j.transpose() * j;
      g.noalias() = j.transpose() * r;
    } else {
      lambda *= config.lm_lambda_up;
      if (lambda > 1e40) break;
    }
  }
  return result;
}

std::pair<pnlss::PnlssModel, OptReport> train(const pnlss::PnlssModel& init_model,
                                              const std::vector<TimeSeries>& data,
                                              const std::vector<pnlss::SimulationState>& inits,
                                              const TrainConfig& config,
                                              const CheckpointCallback& on_iteration) {
  config.validate();
  check_data(data, inits);
  init_model.validate();
  const auto t_start = std::chrono::steady_clock::now();

  // All 90 combinations, state choice major so index order is the
  // lexicographic tie-break order.
  std::vector<SubsetMask> masks;
  for (Subset sc : kStateSubsets)
    for (Subset oc : kOutputSubsets)
      masks.push_back(make_subset(sc, oc, init_model.state_basis, init_model.output_basis));

  pnlss::PnlssModel current = init_model;
  double current_cost = cost(current, data, inits);

  OptReport report;
  report.initial_cost = current_cost;
  report.initial_e_rms = relative_rms(current, data, inits);
  report.probe_steps = config.probe_steps;
  report.lm_steps_per_run = config.lm_steps_per_run;

  for (int iter = 1; iter <= config.max_outer_iterations; ++iter) {
    std::vector<double> probe_cost(masks.size(), kInf);
    const int n_threads = std::min<int>(config.threads, static_cast<int>(masks.size()));
    std::vector<std::thread> workers;
    std::atomic<std::size_t> next{0};
    auto body = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= masks.size()) return;
        const LmResult probe =
            lm_minimize(current, data, inits, masks[i], config, config.probe_steps);
        probe_cost[i] = probe.cost_trace.back();
      }
    };
    if (n_threads > 1) {
      workers.reserve(static_cast<std::size_t>(n_threads));
      for (int t = 0; t < n_threads; ++t) workers.emplace_back(body);
      for (std::thread& w : workers) w.join();
    } else {
      body();
    }

    std::size_t winner = 0;
    for (std::size_t i = 1; i < masks.size(); ++i)
      if (probe_cost[i] < probe_cost[winner]) winner = i;

    const LmResult refined =
        lm_minimize(current, data, inits, masks[winner], config, config.lm_steps_per_run);
    const double refined_cost = refined.cost_trace.back();
    if (!(refined_cost < current_cost) ||
        current_cost - refined_cost <= config.stop_tolerance * current_cost)
      break;

    current = refined.model;
    current_cost = refined_cost;

    OptIteration it;
    it.iteration = iter;
    it.state_subset = masks[winner].state_choice;
    it.output_subset = masks[winner].output_choice;
    it.cost = refined_cost;
    it.e_rms = relative_rms(current, data, inits);
    it.evaluated.reserve(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i)
      it.evaluated.push_back({masks[i].state_choice, masks[i].output_choice, probe_cost[i]});
    report.iterations.push_back(std::move(it));
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (on_iteration) on_iteration(current, report);
  }

  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {current, report};
}

pnlss::SimulationState estimate_initial_state(const pnlss::PnlssModel& model,
                                              const TimeSeries& record, std::size_t window,
                                              bool estimate_u0, int max_steps) {
  if (window == 0 || window > record.size())
    throw std::invalid_argument("estimate_initial_state: window out of range");
  if (!record.has_output())
    throw std::invalid_argument("estimate_initial_state: record without output");
  const int n_x = model.order();
  const int n_p = n_x + (estimate_u0 ? 1 : 0);

  auto make_state = [&](const Eigen::VectorXd& p) {
    pnlss::SimulationState s{p.head(n_x), std::nullopt};
    if (estimate_u0) s.u0 = p(n_x);
    return s;
  };
  std::vector<double> y(window);
  auto window_cost = [&](const Eigen::VectorXd& p) {
    if (!pnlss::simulate_into(model, record.input.data(), window, make_state(p), y.data()))
      return kInf;
    double sse = 0.0;
    for (std::size_t t = 0; t < window; ++t) {
      const double e = record.output[t] - y[t];
      sse += e * e;
    }
    return sse;
  };
  auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    if (!pnlss::simulate_into(model, record.input.data(), window, make_state(p), y.data()))
      return false;
    for (std::size_t t = 0; t < window; ++t)
      r(static_cast<Eigen::Index>(t)) = record.output[t] - y[t];
    return true;
  };

  Eigen::VectorXd p = Eigen::VectorXd::Zero(n_p);
  double best = window_cost(p);
  if (!std::isfinite(best)) return make_state(p);

  Eigen::VectorXd r_plus(static_cast<Eigen::Index>(window)),
      r_minus(static_cast<Eigen::Index>(window)), r0(static_cast<Eigen::Index>(window));
  Eigen::MatrixXd j(static_cast<Eigen::Index>(window), n_p);
  double lambda = -1.0;

  for (int step = 0; step < max_steps; ++step) {
    if (!residual(p, r0)) break;
    bool fd_ok = true;
    for (int i = 0; i < n_p && fd_ok; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(p(i)));
      Eigen::VectorXd pp = p, pm = p;
      pp(i) += h;
      pm(i) -= h;
      // residual = data - model, so dy/dp = -(r_plus - r_minus)/2h.
      fd_ok = residual(pp, r_plus) && residual(pm, r_minus);
      if (fd_ok) j.col(i) = -(r_plus - r_minus) / (2.0 * h);
    }
    if (!fd_ok) break;
    const Eigen::MatrixXd h_mat = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r0;
    if (g.norm() <= 1e-14 * (1.0 + best)) break;
    if (lambda < 0.0) lambda = 1e-3 * std::max(h_mat.diagonal().mean(), 1e-300);

    bool accepted = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd damped = h_mat;
      damped.diagonal().array() += lambda;
      const Eigen::VectorXd delta = damped.ldlt().solve(g);
      const Eigen::VectorXd cand = p + delta;
      const double c = window_cost(cand);
      if (c < best) {
        p = cand;
        best = c;
        lambda *= 0.1;
        accepted = delta.norm() > 1e-14 * (1.0 + p.norm());
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e40) break;
    }
    if (!accepted) break;
  }
  return make_state(p);
}

namespace {

nlohmann::json iteration_to_json(const OptIteration& it) {
  nlohmann::json evaluated = nlohmann::json::array();
  for (const EvaluatedCombination& ev : it.evaluated)
    evaluated.push_back({{"state_subset", subset_name(ev.state_subset)},
                         {"output_subset", subset_name(ev.output_subset)},
                         {"cost", ev.cost}});
  return {{"iteration", it.iteration},
          {"state_subset", subset_name(it.state_subset)},
          {"output_subset", subset_name(it.output_subset)},
          {"cost", it.cost},
          {"e_rms", it.e_rms},
          {"evaluated", std::move(evaluated)}};
}

}  // namespace

std::string report_to_json(const OptReport& report) {
  nlohmann::json iters = nlohmann::json::array();
  for (const OptIteration& it : report.iterations) iters.push_back(iteration_to_json(it));
  const nlohmann::json doc = {{"initial_cost", report.initial_cost},
                              {"initial_e_rms", report.initial_e_rms},
                              {"wall_time_seconds", report.wall_time_seconds},
                              {"probe_steps", report.probe_steps},
                              {"lm_steps_per_run", report.lm_steps_per_run},
                              {"iterations", std::move(iters)}};
  return doc.dump(2);
}

OptReport report_from_json(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  OptReport report;
  report.initial_cost = doc.at("initial_cost").get<double>();
  report.initial_e_rms = doc.at("initial_e_rms").get<double>();
  report.wall_time_seconds = doc.at("wall_time_seconds").get<double>();
  report.probe_steps = doc.at("probe_steps").get<int>();
  report.lm_steps_per_run = doc.at("lm_steps_per_run").get<int>();
  for (const nlohmann::json& j : doc.at("iterations")) {
    OptIteration it;
    it.iteration = j.at("iteration").get<int>();
    it.state_subset = subset_from_name(j.at("state_subset").get<std::string>());
    it.output_subset = subset_from_name(j.at("output_subset").get<std::string>());
    it.cost = j.at("cost").get<double>();
    it.e_rms = j.at("e_rms").get<double>();
    for (const nlohmann::json& e : j.at("evaluated"))
      it.evaluated.push_back({subset_from_name(e.at("state_subset").get<std::string>()),
                              subset_from_name(e.at("output_subset").get<std::string>()),
                              e.at("cost").get<double>()});
    report.iterations.push_back(std::move(it));
  }
  return report;
}

}  // namespace nlsid::optim
