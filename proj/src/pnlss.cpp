#include "nlsid/pnlss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace nlsid::pnlss {

namespace {

constexpr double kDivergenceBound = 1e12;

double ipow(double base, int exp) {
  double acc = 1.0;
  for (int i = 0; i < exp; ++i) acc *= base;
  return acc;
}

void check_degree_set(const std::vector<int>& degree_set) {
  for (int d : degree_set) {
    if (d == 1)
      throw std::invalid_argument("degree 1 is covered by the linear part and not allowed");
    if (d < 0) throw std::invalid_argument("negative monomial degree");
  }
}

void compose(int remaining, int var, std::vector<int>& current,
             std::vector<std::vector<int>>& out) {
  const int n_vars = static_cast<int>(current.size());
  if (var == n_vars - 1) {
    current[var] = remaining;
    out.push_back(current);
    return;
  }
  for (int e = 0; e <= remaining; ++e) {
    current[var] = e;
    compose(remaining - e, var + 1, current, out);
  }
  current[var] = 0;
}

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

MonomialBasis enumerate_basis(int n_x, int n_u, const std::vector<int>& degree_set) {
  if (n_x < 0 || n_u < 1) throw std::invalid_argument("enumerate_basis: bad dimensions");
  check_degree_set(degree_set);

  MonomialBasis basis;
  basis.n_states = n_x;
  basis.n_inputs = n_u;
  basis.degree_set = degree_set;
  std::sort(basis.degree_set.begin(), basis.degree_set.end());
  basis.degree_set.erase(std::unique(basis.degree_set.begin(), basis.degree_set.end()),
                         basis.degree_set.end());

  std::vector<int> current(static_cast<std::size_t>(n_x + n_u), 0);
  for (int d : basis.degree_set) compose(d, 0, current, basis.exponents);
  std::sort(basis.exponents.begin(), basis.exponents.end());
  return basis;
}

std::size_t basis_count(int n_x, int n_u, const std::vector<int>& degree_set) {
  check_degree_set(degree_set);
  std::size_t count = 0;
  for (int d : degree_set)
    count += binomial(static_cast<std::size_t>(n_x + n_u + d - 1), static_cast<std::size_t>(d));
  return count;
}

void MonomialBasis::evaluate(const Eigen::VectorXd& x, double u, Eigen::VectorXd& out) const {
  out.resize(static_cast<Eigen::Index>(size()));
  for (std::size_t m = 0; m < size(); ++m) {
    const std::vector<int>& exp = exponents[m];
    double acc = 1.0;
    for (int i = 0; i < n_states; ++i)
      for (int e = 0; e < exp[static_cast<std::size_t>(i)]; ++e) acc *= x(i);
    for (int e = 0; e < exp[static_cast<std::size_t>(n_states)]; ++e) acc *= u;
    out(static_cast<Eigen::Index>(m)) = acc;
  }
}

void MonomialBasis::state_jacobian(const Eigen::VectorXd& x, double u,
                                   Eigen::MatrixXd& out) const {
  out.setZero(static_cast<Eigen::Index>(size()), n_states);
  for (std::size_t m = 0; m < size(); ++m) {
    const std::vector<int>& exp = exponents[m];
    const double upow = ipow(u, exp[static_cast<std::size_t>(n_states)]);
    for (int i = 0; i < n_states; ++i) {
      const int li = exp[static_cast<std::size_t>(i)];
      if (li == 0) continue;
      double acc = li * ipow(x(i), li - 1) * upow;
      for (int j = 0; j < n_states; ++j)
        if (j != i) acc *= ipow(x(j), exp[static_cast<std::size_t>(j)]);
      out(static_cast<Eigen::Index>(m), i) = acc;
    }
  }
}

std::size_t PnlssModel::parameter_count() const {
  const std::size_t n_x = static_cast<std::size_t>(order());
  return n_x * n_x + n_x + n_x + 1 + n_x * state_basis.size() + output_basis.size();
}

void PnlssModel::validate() const {
  const int n_x = order();
  if (state_basis.n_states != n_x || output_basis.n_states != n_x)
    throw std::invalid_argument("PnlssModel: basis state dimension mismatch");
  if (e.rows() != n_x || e.cols() != static_cast<Eigen::Index>(state_basis.size()))
    throw std::invalid_argument("PnlssModel: E dimensions do not match the state basis");
  if (f.rows() != 1 || f.cols() != static_cast<Eigen::Index>(output_basis.size()))
    throw std::invalid_argument("PnlssModel: F dimensions do not match the output basis");
  if (linear.b.size() != n_x || linear.c.size() != n_x)
    throw std::invalid_argument("PnlssModel: inconsistent linear dimensions");
}

PnlssModel from_linear(const LinearSsModel& linear, const std::vector<int>& state_degrees,
                       const std::vector<int>& output_degrees) {
  PnlssModel model;
  model.linear = linear;
  const int n_x = linear.order();
  model.state_basis = enumerate_basis(n_x, 1, state_degrees);
  model.output_basis = enumerate_basis(n_x, 1, output_degrees);
  model.e = Eigen::MatrixXd::Zero(n_x, static_cast<Eigen::Index>(model.state_basis.size()));
  model.f = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(model.output_basis.size()));
  return model;
}

bool simulate_into(const PnlssModel& model, const double* u, std::size_t n,
                   const SimulationState& init, double* y_out, std::size_t* diverged_at) {
  const int n_x = model.order();
  Eigen::VectorXd x = init.x0;
  if (x.size() != n_x) throw std::invalid_argument("simulate: x0 dimension mismatch");

  const std::size_t n_zeta = model.state_basis.size();
  const std::size_t n_eta = model.output_basis.size();
  Eigen::VectorXd zeta(static_cast<Eigen::Index>(n_zeta));
  Eigen::VectorXd eta(static_cast<Eigen::Index>(n_eta));
  Eigen::VectorXd x_next(n_x);

  for (std::size_t t = 0; t < n; ++t) {
    const double u_lin = u[t];
    const double u_mon = (t == 0 && init.u0) ? *init.u0 : u_lin;
    if (n_zeta > 0) model.state_basis.evaluate(x, u_mon, zeta);
    if (n_eta > 0) model.output_basis.evaluate(x, u_mon, eta);

    // Deterministic accumulation order: A row, then B, then E columns.
    double y = 0.0;
    for (int j = 0; j < n_x; ++j) y += model.linear.c(j) * x(j);
    y += model.linear.d * u_lin;
    for (std::size_t c = 0; c < n_eta; ++c)
      y += model.f(0, static_cast<Eigen::Index>(c)) * eta(static_cast<Eigen::Index>(c));
    y_out[t] = y;

    for (int i = 0; i < n_x; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n_x; ++j) acc += model.linear.a(i, j) * x(j);
      acc += model.linear.b(i) * u_lin;
      for (std::size_t c = 0; c < n_zeta; ++c)
        acc += model.e(i, static_cast<Eigen::Index>(c)) * zeta(static_cast<Eigen::Index>(c));
      x_next(i) = acc;
    }

    bool bad = !std::isfinite(y);
    for (int i = 0; i < n_x; ++i)
      if (!std::isfinite(x_next(i)) || std::abs(x_next(i)) > kDivergenceBound) bad = true;
    if (bad) {
      if (diverged_at) *diverged_at = t;
      return false;
    }
    x.swap(x_next);
  }
  return true;
}

TimeSeries simulate(const PnlssModel& model, const TimeSeries& input,
                    const SimulationState& init) {
  model.validate();
  if (model.linear.sample_rate > 0.0 && input.sample_rate > 0.0 &&
      std::abs(model.linear.sample_rate - input.sample_rate) >
          1e-9 * model.linear.sample_rate)
    throw std::invalid_argument("simulate: record sample rate differs from the model's");

  TimeSeries out = input;
  out.output.assign(input.size(), 0.0);
  std::size_t bad_index = 0;
  if (!simulate_into(model, input.input.data(), input.size(), init, out.output.data(),
                     &bad_index))
    throw DivergenceError(bad_index);
  return out;
}

Eigen::VectorXd flatten_parameters(const PnlssModel& model) {
  model.validate();
  const Eigen::Index n_x = model.order();
  const Eigen::Index n_zeta = static_cast<Eigen::Index>(model.state_basis.size());
  const Eigen::Index n_eta = static_cast<Eigen::Index>(model.output_basis.size());
  Eigen::VectorXd theta(static_cast<Eigen::Index>(model.parameter_count()));
  Eigen::Index pos = 0;
  theta.segment(pos, n_x * n_x) = Eigen::Map<const Eigen::VectorXd>(model.linear.a.data(), n_x * n_x);
  pos += n_x * n_x;
  theta.segment(pos, n_x) = model.linear.b;
  pos += n_x;
  theta.segment(pos, n_x) = model.linear.c.transpose();
  pos += n_x;
  theta(pos++) = model.linear.d;
  theta.segment(pos, n_x * n_zeta) =
      Eigen::Map<const Eigen::VectorXd>(model.e.data(), n_x * n_zeta);
  pos += n_x * n_zeta;
  theta.segment(pos, n_eta) = Eigen::Map<const Eigen::VectorXd>(model.f.data(), n_eta);
  return theta;
}

PnlssModel unflatten_parameters(const Eigen::VectorXd& theta, const PnlssModel& templ) {
  if (theta.size() != static_cast<Eigen::Index>(templ.parameter_count()))
    throw std::invalid_argument("unflatten_parameters: length mismatch");
  PnlssModel model = templ;
  const Eigen::Index n_x = model.order();
  const Eigen::Index n_zeta = static_cast<Eigen::Index>(model.state_basis.size());
  const Eigen::Index n_eta = static_cast<Eigen::Index>(model.output_basis.size());
  Eigen::Index pos = 0;
  model.linear.a = Eigen::Map<const Eigen::MatrixXd>(theta.data() + pos, n_x, n_x);
  pos += n_x * n_x;
  model.linear.b = theta.segment(pos, n_x);
  pos += n_x;
  model.linear.c = theta.segment(pos, n_x).transpose();
  pos += n_x;
  model.linear.d = theta(pos++);
  model.e = Eigen::Map<const Eigen::MatrixXd>(theta.data() + pos, n_x, n_zeta);
  pos += n_x * n_zeta;
  model.f = Eigen::Map<const Eigen::MatrixXd>(theta.data() + pos, 1, n_eta);
  return model;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  if (static_cast<Eigen::Index>(rows.size()) != r)
    throw std::invalid_argument("model JSON: matrix row count mismatch");
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != c)
      throw std::invalid_argument("model JSON: matrix column count mismatch");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

}  // namespace

std::string model_to_json(const PnlssModel& model) {
  model.validate();
  nlohmann::json j;
  j["n_x"] = model.order();
  j["sample_rate"] = model.linear.sample_rate;
  j["a"] = matrix_to_json(model.linear.a);
  j["b"] = std::vector<double>(model.linear.b.data(), model.linear.b.data() + model.linear.b.size());
  j["c"] = std::vector<double>(model.linear.c.data(), model.linear.c.data() + model.linear.c.size());
  j["d"] = model.linear.d;
  j["e"] = matrix_to_json(model.e);
  j["f"] = matrix_to_json(model.f);
  j["state_degrees"] = model.state_basis.degree_set;
  j["output_degrees"] = model.output_basis.degree_set;
  j["state_exponents"] = model.state_basis.exponents;
  j["output_exponents"] = model.output_basis.exponents;
  return j.dump(2);
}

PnlssModel model_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  const int n_x = j.at("n_x").get<int>();

  PnlssModel model;
  model.linear.sample_rate = j.at("sample_rate").get<double>();
  model.linear.a = matrix_from_json(j.at("a"), n_x, n_x);
  const auto b = j.at("b").get<std::vector<double>>();
  const auto c = j.at("c").get<std::vector<double>>();
  if (static_cast<int>(b.size()) != n_x || static_cast<int>(c.size()) != n_x)
    throw std::invalid_argument("model JSON: B/C dimension mismatch");
  model.linear.b = Eigen::Map<const Eigen::VectorXd>(b.data(), n_x);
  model.linear.c = Eigen::Map<const Eigen::RowVectorXd>(c.data(), n_x);
  model.linear.d = j.at("d").get<double>();

  auto load_basis = [n_x](const nlohmann::json& degrees, const nlohmann::json& exps) {
    MonomialBasis basis;
    basis.n_states = n_x;
    basis.n_inputs = 1;
    basis.degree_set = degrees.get<std::vector<int>>();
    basis.exponents = exps.get<std::vector<std::vector<int>>>();
    for (const auto& e : basis.exponents)
      if (static_cast<int>(e.size()) != n_x + 1)
        throw std::invalid_argument("model JSON: exponent tuple length mismatch");
    return basis;
  };
  model.state_basis = load_basis(j.at("state_degrees"), j.at("state_exponents"));
  model.output_basis = load_basis(j.at("output_degrees"), j.at("output_exponents"));

  model.e = matrix_from_json(j.at("e"), n_x, static_cast<Eigen::Index>(model.state_basis.size()));
  model.f = matrix_from_json(j.at("f"), 1, static_cast<Eigen::Index>(model.output_basis.size()));
  model.validate();
  return model;
}

void save_model(const PnlssModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << model_to_json(model) << '\n';
}

PnlssModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace nlsid::pnlss
