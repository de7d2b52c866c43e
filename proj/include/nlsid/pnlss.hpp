#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlsid/linear_model.hpp"
#include "nlsid/timeseries.hpp"

namespace nlsid::pnlss {

/// Canonical monomial basis over the state variables and the single input.
///
/// Each exponent tuple has length n_states + n_inputs with layout
/// [l_1 .. l_nx, k]; its total degree lies in degree_set (degree 1 is never
/// allowed, the linear part covers it). Tuples are unique and sorted
/// lexicographically, so two enumerations with equal arguments are identical.
struct MonomialBasis {
  int n_states = 0;
  int n_inputs = 1;
  std::vector<int> degree_set;                // sorted
  std::vector<std::vector<int>> exponents;    // lexicographic

  std::size_t size() const { return exponents.size(); }
  int n_vars() const { return n_states + n_inputs; }

  /// Monomial vector in canonical order; 0^0 is defined as 1.
  void evaluate(const Eigen::VectorXd& x, double u, Eigen::VectorXd& out) const;
  /// Partial derivatives with respect to the states, size() x n_states.
  void state_jacobian(const Eigen::VectorXd& x, double u, Eigen::MatrixXd& out) const;
};

/// Exhaustive canonical enumeration; the count matches
/// sum_d C(n_x + n_u + d - 1, d) over the degree set.
MonomialBasis enumerate_basis(int n_x, int n_u, const std::vector<int>& degree_set);

/// Expected basis size from the combinatorial formula.
std::size_t basis_count(int n_x, int n_u, const std::vector<int>& degree_set);

/// Recursion seeds for records that start mid-trajectory. When u0 is set, the
/// t=0 monomials are evaluated with u0 instead of the record's first input.
struct SimulationState {
  Eigen::VectorXd x0;
  std::optional<double> u0;

  static SimulationState zero(int n_x) { return {Eigen::VectorXd::Zero(n_x), std::nullopt}; }
};

/// Polynomial nonlinear state-space model:
///   x(t+1) = A x(t) + B u(t) + E zeta(x(t), u(t))
///   y(t)   = C x(t) + D u(t) + F eta(x(t), u(t))
struct PnlssModel {
  LinearSsModel linear;
  Eigen::MatrixXd e;  // n_x x n_zeta
  Eigen::MatrixXd f;  // 1 x n_eta
  MonomialBasis state_basis;
  MonomialBasis output_basis;

  int order() const { return linear.order(); }
  std::size_t parameter_count() const;
  void validate() const;
};

/// Linear model lifted into the PNLSS structure with the given (possibly
/// empty) monomial degree sets and zero E, F.
PnlssModel from_linear(const LinearSsModel& linear, const std::vector<int>& state_degrees,
                       const std::vector<int>& output_degrees);

struct DivergenceError : std::runtime_error {
  std::size_t sample_index;
  explicit DivergenceError(std::size_t index)
      : std::runtime_error("simulation diverged at sample " + std::to_string(index)),
        sample_index(index) {}
};

/// State/output recursion over a raw input sequence. Returns false (and the
/// first divergent sample index) when a state magnitude exceeds 1e12 or turns
/// non-finite. Output buffer must hold n samples.
bool simulate_into(const PnlssModel& model, const double* u, std::size_t n,
                   const SimulationState& init, double* y_out,
                   std::size_t* diverged_at = nullptr);

/// Simulates the model over the record's input channel; the result is a copy
/// of the record with the output channel replaced. Throws DivergenceError.
TimeSeries simulate(const PnlssModel& model, const TimeSeries& input,
                    const SimulationState& init);

/// Column-stacked parameter vector [vec(A); vec(B); vec(C); vec(D); vec(E); vec(F)].
Eigen::VectorXd flatten_parameters(const PnlssModel& model);
PnlssModel unflatten_parameters(const Eigen::VectorXd& theta, const PnlssModel& templ);

void save_model(const PnlssModel& model, const std::string& path);
PnlssModel load_model(const std::string& path);
std::string model_to_json(const PnlssModel& model);
PnlssModel model_from_json(const std::string& text);

}  // namespace nlsid::pnlss
