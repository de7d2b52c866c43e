#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nlsid/pnlss.hpp"
#include "nlsid/timeseries.hpp"

namespace nlsid::optim {

/// Predefined nonlinear-coefficient subsets. Diagonal applies to the state
/// equation only; every other choice is valid for both equations, giving
/// 10 x 9 = 90 combinations.
enum class Subset {
  Diagonal,         // pure powers of a single state, no input factor
  InputOnly,        // monomials in the input alone
  StateAffine,      // exactly one state, linearly, times any input power
  NoCrossProducts,  // pure powers of a single variable
  FullStateAffine,  // at most one state, linear if present (includes DC)
  DegreeUpTo3,      // total degree <= 3
  StatesOnly,       // no input factor, degree > 0
  OddDegrees,       // odd total degree
  AllExceptDc,      // degree > 0
  All,
};

inline constexpr std::array<Subset, 10> kStateSubsets = {
    Subset::Diagonal,       Subset::InputOnly,   Subset::StateAffine,
    Subset::NoCrossProducts, Subset::FullStateAffine, Subset::DegreeUpTo3,
    Subset::StatesOnly,     Subset::OddDegrees,  Subset::AllExceptDc,
    Subset::All};

inline constexpr std::array<Subset, 9> kOutputSubsets = {
    Subset::InputOnly,   Subset::StateAffine, Subset::NoCrossProducts,
    Subset::FullStateAffine, Subset::DegreeUpTo3, Subset::StatesOnly,
    Subset::OddDegrees,  Subset::AllExceptDc, Subset::All};

const char* subset_name(Subset s);
Subset subset_from_name(const std::string& name);

/// Column indices of the basis selected by a subset choice.
/// Diagonal with state_equation == false throws.
std::vector<int> select_columns(Subset choice, const pnlss::MonomialBasis& basis,
                                bool state_equation);

/// The free parameters of one LM run: the full linear part plus the selected
/// E and F columns.
struct SubsetMask {
  Subset state_choice = Subset::All;
  Subset output_choice = Subset::All;
  bool include_linear = true;
  std::vector<int> e_columns;  // sorted indices into the state basis
  std::vector<int> f_columns;  // sorted indices into the output basis
};

SubsetMask make_subset(Subset state_choice, Subset output_choice,
                       const pnlss::MonomialBasis& state_basis,
                       const pnlss::MonomialBasis& output_basis);

struct TrainConfig {
  int max_outer_iterations = 20;
  int lm_steps_per_run = 1000;  // refinement of the winning combination
  int probe_steps = 100;        // screening run length per combination
  double lm_lambda_init = 1e-3; // relative to mean diag(J'J)
  double lm_lambda_up = 10.0;
  double lm_lambda_down = 0.1;
  double stop_tolerance = 0.0;  // required relative cost improvement
  unsigned long long rng_seed = 0;
  int threads = 1;

  void validate() const;
};

struct EvaluatedCombination {
  Subset state_subset;
  Subset output_subset;
  double cost;
};

struct OptIteration {
  int iteration = 0;
  Subset state_subset = Subset::All;
  Subset output_subset = Subset::All;
  double cost = 0.0;
  double e_rms = 0.0;  // relative rms over the concatenated records
  std::vector<EvaluatedCombination> evaluated;
};

struct OptReport {
  double initial_cost = 0.0;
  double initial_e_rms = 0.0;
  std::vector<OptIteration> iterations;
  double wall_time_seconds = 0.0;
  int probe_steps = 0;
  int lm_steps_per_run = 0;
};

std::string report_to_json(const OptReport& report);
OptReport report_from_json(const std::string& text);

/// Sum of squared output errors over all records; divergence gives +infinity.
double cost(const pnlss::PnlssModel& model, const std::vector<TimeSeries>& data,
            const std::vector<pnlss::SimulationState>& inits);

/// Relative rms error sqrt(sum e^2 / sum y^2) over the concatenated records;
/// +infinity on divergence.
double relative_rms(const pnlss::PnlssModel& model, const std::vector<TimeSeries>& data,
                    const std::vector<pnlss::SimulationState>& inits);

/// Output sensitivities d y(t) / d theta for the masked parameters, rows in
/// sample order. Parameter order: vec(A), vec(B), vec(C), D, selected E
/// columns (column-major), selected F columns. Throws DivergenceError.
Eigen::MatrixXd jacobian(const pnlss::PnlssModel& model, const TimeSeries& data,
                         const pnlss::SimulationState& init, const SubsetMask& mask);

struct LmResult {
  pnlss::PnlssModel model;
  std::vector<double> cost_trace;  // initial cost plus each accepted step
};

/// Damped least squares on the masked parameters; returns the best model
/// found (the input model when nothing improves).
LmResult lm_minimize(const pnlss::PnlssModel& model, const std::vector<TimeSeries>& data,
                     const std::vector<pnlss::SimulationState>& inits, const SubsetMask& mask,
                     const TrainConfig& config, int n_steps);

using CheckpointCallback =
    std::function<void(const pnlss::PnlssModel& model, const OptReport& report)>;

/// Subset-iteration training: each outer iteration probes all 90 subset
/// combinations with short LM runs, refines the cheapest one with
/// lm_steps_per_run, and adopts it when it improves the cost. Ties break
/// lexicographically by (state, output) enum order. Deterministic given the
/// config and data.
std::pair<pnlss::PnlssModel, OptReport> train(const pnlss::PnlssModel& init_model,
                                              const std::vector<TimeSeries>& data,
                                              const std::vector<pnlss::SimulationState>& inits,
                                              const TrainConfig& config,
                                              const CheckpointCallback& on_iteration = {});

/// Estimates x0 (and optionally a pre-record input u0) by LM on the squared
/// output error over the leading window, starting from zero.
pnlss::SimulationState estimate_initial_state(const pnlss::PnlssModel& model,
                                              const TimeSeries& record, std::size_t window,
                                              bool estimate_u0, int max_steps = 200);

}  // namespace nlsid::optim
