#include "spikeforge/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <type_traits>

#include "spikeforge/error.hpp"

namespace spikeforge {

namespace {

// log(k!) with a table for the counts that actually occur in 10 ms bins.
double log_factorial(int k) {
  static const std::array<double, 64> table = [] {
    std::array<double, 64> t{};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::lgamma(static_cast<double>(i) + 1.0);
    return t;
  }();
  return k < static_cast<int>(table.size()) ? table[k] : std::lgamma(k + 1.0);
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const std::string& what) {
  if (!ok) throw DataError(what);
}

double clamp_exponent(double e) { return std::clamp(e, -kExponentClamp, kExponentClamp); }

// 1 where the exponent was inside the clamp, 0 where clamping froze it.
double clamp_mask(double e) {
  return (e > -kExponentClamp && e < kExponentClamp) ? 1.0 : 0.0;
}

void check_features(const ModelParams& params, const Eigen::MatrixXd& features) {
  if (features.cols() != input_dim(params)) {
    throw DataError("model expects " + std::to_string(input_dim(params)) +
                    "-dim features, got " + std::to_string(features.cols()));
  }
}

// Walks every parameter block in a fixed order. Used for flatten/unflatten.
template <typename Params, typename Fn>
void for_each_block(Params& params, Fn&& fn) {
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StmParams>) {
          fn(p.w.data(), p.w.size());
          fn(p.u.data(), p.u.size());
          fn(p.beta.data(), p.beta.size());
          fn(p.b.data(), p.b.size());
        } else if constexpr (std::is_same_v<T, LnpParams>) {
          fn(p.w.data(), p.w.size());
          fn(&p.b, Eigen::Index{1});
        } else {
          fn(p.w1.data(), p.w1.size());
          fn(p.b1.data(), p.b1.size());
          fn(p.w2.data(), p.w2.size());
          fn(p.b2.data(), p.b2.size());
          fn(p.w3.data(), p.w3.size());
          fn(&p.b3, Eigen::Index{1});
        }
      },
      params);
}

struct StmForward {
  Eigen::MatrixXd quad;       // N x M, u_m . x
  Eigen::MatrixXd exponent;   // N x K, before clamping
  Eigen::MatrixXd component;  // N x K, exp(clamped exponent)
  Eigen::VectorXd rate;
};

StmForward stm_forward(const StmParams& p, const Eigen::MatrixXd& x) {
  StmForward f;
  f.quad = x * p.u.transpose();
  f.exponent = x * p.w.transpose();
  f.exponent.rowwise() += p.b.transpose();
  if (p.u.rows() > 0) f.exponent += f.quad.array().square().matrix() * p.beta.transpose();
  f.component = f.exponent.unaryExpr([](double e) { return std::exp(clamp_exponent(e)); });
  f.rate = f.component.rowwise().sum();
  return f;
}

struct MlnnForward {
  Eigen::MatrixXd pre1, act1, pre2, act2;
  Eigen::VectorXd exponent;
  Eigen::VectorXd rate;
};

MlnnForward mlnn_forward(const MlnnParams& p, const Eigen::MatrixXd& x) {
  MlnnForward f;
  f.pre1 = x * p.w1.transpose();
  f.pre1.rowwise() += p.b1.transpose();
  f.act1 = f.pre1.cwiseMax(0.0);
  f.pre2 = f.act1 * p.w2.transpose();
  f.pre2.rowwise() += p.b2.transpose();
  f.act2 = f.pre2.cwiseMax(0.0);
  f.exponent = (f.act2 * p.w3).array() + p.b3;
  f.rate = f.exponent.unaryExpr([](double e) { return std::exp(clamp_exponent(e)); });
  return f;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Stm: return "stm";
    case ModelKind::Lnp: return "lnp";
    case ModelKind::Mlnn: return "mlnn";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "stm") return ModelKind::Stm;
  if (name == "lnp") return ModelKind::Lnp;
  if (name == "mlnn") return ModelKind::Mlnn;
  throw UsageError("unknown model kind '" + std::string(name) + "' (expected stm, lnp or mlnn)");
}

ModelKind kind_of(const ModelParams& params) {
  return std::visit(Overloaded{[](const StmParams&) { return ModelKind::Stm; },
                               [](const LnpParams&) { return ModelKind::Lnp; },
                               [](const MlnnParams&) { return ModelKind::Mlnn; }},
                    params);
}

Eigen::Index input_dim(const ModelParams& params) {
  return std::visit(Overloaded{[](const StmParams& p) { return p.w.cols(); },
                               [](const LnpParams& p) { return p.w.size(); },
                               [](const MlnnParams& p) { return p.w1.cols(); }},
                    params);
}

void validate(const ModelParams& params) {
  std::visit(Overloaded{
                 [](const StmParams& p) {
                   require(p.w.rows() >= 1, "stm: need at least one component");
                   require(p.u.cols() == p.w.cols() || p.u.rows() == 0,
                           "stm: quadratic filter width differs from linear filters");
                   require(p.beta.rows() == p.w.rows() && p.beta.cols() == p.u.rows(),
                           "stm: beta must be K x M");
                   require(p.b.size() == p.w.rows(), "stm: need one offset per component");
                 },
                 [](const LnpParams&) {},
                 [](const MlnnParams& p) {
                   require(p.b1.size() == p.w1.rows(), "mlnn: b1 size differs from W1 rows");
                   require(p.w2.cols() == p.w1.rows(), "mlnn: W2 columns differ from W1 rows");
                   require(p.b2.size() == p.w2.rows(), "mlnn: b2 size differs from W2 rows");
                   require(p.w3.size() == p.w2.rows(), "mlnn: w3 size differs from W2 rows");
                 }},
             params);
}

Eigen::Index parameter_count(const ModelParams& params) {
  Eigen::Index n = 0;
  for_each_block(params, [&](const double*, Eigen::Index size) { n += size; });
  return n;
}

Eigen::VectorXd flatten(const ModelParams& params) {
  Eigen::VectorXd flat(parameter_count(params));
  Eigen::Index offset = 0;
  for_each_block(params, [&](const double* data, Eigen::Index size) {
    flat.segment(offset, size) = Eigen::Map<const Eigen::VectorXd>(data, size);
    offset += size;
  });
  return flat;
}

ModelParams unflatten(const ModelParams& like, const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count(like)) throw DataError("unflatten: size mismatch");
  ModelParams out = like;
  Eigen::Index offset = 0;
  for_each_block(out, [&](double* data, Eigen::Index size) {
    Eigen::Map<Eigen::VectorXd>(data, size) = flat.segment(offset, size);
    offset += size;
  });
  return out;
}

Eigen::VectorXd rates(const ModelParams& params, const Eigen::MatrixXd& features) {
  check_features(params, features);
  return std::visit(
      Overloaded{[&](const StmParams& p) -> Eigen::VectorXd { return stm_forward(p, features).rate; },
                 [&](const LnpParams& p) -> Eigen::VectorXd {
                   Eigen::VectorXd e = (features * p.w).array() + p.b;
                   return e.unaryExpr([](double v) { return std::exp(clamp_exponent(v)); });
                 },
                 [&](const MlnnParams& p) -> Eigen::VectorXd {
                   return mlnn_forward(p, features).rate;
                 }},
      params);
}

double rate(const ModelParams& params, const Eigen::VectorXd& x) {
  return rates(params, x.transpose())(0);
}

double poisson_log_likelihood(std::span<const double> rates, std::span<const int> counts) {
  if (rates.size() != counts.size()) throw DataError("poisson_log_likelihood: length mismatch");
  if (rates.empty()) throw DataError("poisson_log_likelihood: empty input");
  double total = 0.0;
  for (std::size_t t = 0; t < rates.size(); ++t) {
    if (!(rates[t] > 0.0)) throw DataError("poisson_log_likelihood: nonpositive rate");
    if (counts[t] < 0) throw DataError("poisson_log_likelihood: negative count");
    const double k = counts[t];
    total += k * std::log(rates[t]) - rates[t] - log_factorial(counts[t]);
  }
  return total / static_cast<double>(rates.size());
}

LikelihoodGradient log_likelihood_gradient(const ModelParams& params,
                                           const Eigen::MatrixXd& features,
                                           std::span<const int> counts) {
  check_features(params, features);
  if (static_cast<std::size_t>(features.rows()) != counts.size()) {
    throw DataError("log_likelihood_gradient: counts not aligned with feature rows");
  }
  const Eigen::Index n = features.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  // d(avg loglik)/d(rate_t) = (k_t / rate_t - 1) / N
  auto value_and_residual = [&](const Eigen::VectorXd& rate, Eigen::VectorXd& resid) {
    resid.resize(n);
    double total = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double k = counts[t];
      total += k * std::log(rate[t]) - rate[t];
      if (counts[t] > 1) total -= log_factorial(counts[t]);
      resid[t] = (k / rate[t] - 1.0) * inv_n;
    }
    return total * inv_n;
  };

  LikelihoodGradient out;
  Eigen::VectorXd resid;
  std::visit(
      Overloaded{
          [&](const StmParams& p) {
            const StmForward f = stm_forward(p, features);
            out.value = value_and_residual(f.rate, resid);
            // Per-component sensitivity of the exponent.
            Eigen::MatrixXd g = f.component;
            for (Eigen::Index t = 0; t < n; ++t) {
              for (Eigen::Index c = 0; c < g.cols(); ++c) {
                g(t, c) *= resid[t] * clamp_mask(f.exponent(t, c));
              }
            }
            StmParams grad;
            grad.w = g.transpose() * features;
            grad.b = g.colwise().sum().transpose();
            if (p.u.rows() > 0) {
              grad.beta = g.transpose() * f.quad.array().square().matrix();
              const Eigen::MatrixXd h = ((g * p.beta).array() * f.quad.array() * 2.0).matrix();
              grad.u = h.transpose() * features;
            } else {
              grad.beta = Eigen::MatrixXd::Zero(p.beta.rows(), p.beta.cols());
              grad.u = Eigen::MatrixXd::Zero(p.u.rows(), p.u.cols());
            }
            out.gradient = std::move(grad);
          },
          [&](const LnpParams& p) {
            Eigen::VectorXd e = (features * p.w).array() + p.b;
            const Eigen::VectorXd r =
                e.unaryExpr([](double v) { return std::exp(clamp_exponent(v)); });
            out.value = value_and_residual(r, resid);
            Eigen::VectorXd g(n);
            for (Eigen::Index t = 0; t < n; ++t) g[t] = resid[t] * r[t] * clamp_mask(e[t]);
            LnpParams grad;
            grad.w = features.transpose() * g;
            grad.b = g.sum();
            out.gradient = std::move(grad);
          },
          [&](const MlnnParams& p) {
            const MlnnForward f = mlnn_forward(p, features);
            out.value = value_and_residual(f.rate, resid);
            Eigen::VectorXd g(n);
            for (Eigen::Index t = 0; t < n; ++t) {
              g[t] = resid[t] * f.rate[t] * clamp_mask(f.exponent[t]);
            }
            MlnnParams grad;
            grad.w3 = f.act2.transpose() * g;
            grad.b3 = g.sum();
            Eigen::MatrixXd d2 = g * p.w3.transpose();
            d2.array() *= (f.pre2.array() > 0.0).cast<double>();
            grad.w2 = d2.transpose() * f.act1;
            grad.b2 = d2.colwise().sum().transpose();
            Eigen::MatrixXd d1 = d2 * p.w2;
            d1.array() *= (f.pre1.array() > 0.0).cast<double>();
            grad.w1 = d1.transpose() * features;
            grad.b1 = d1.colwise().sum().transpose();
            out.gradient = std::move(grad);
          }},
      params);
  return out;
}

Eigen::VectorXd ensemble_rates(const ModelEnsemble& ensemble, const Eigen::MatrixXd& features) {
  if (ensemble.members.empty()) throw DataError("ensemble has no members");
  Eigen::VectorXd log_sum = Eigen::VectorXd::Zero(features.rows());
  for (const auto& member : ensemble.members) log_sum += rates(member, features).array().log().matrix();
  return (log_sum / static_cast<double>(ensemble.members.size())).array().exp();
}

double ensemble_rate(const ModelEnsemble& ensemble, const Eigen::VectorXd& x) {
  return ensemble_rates(ensemble, x.transpose())(0);
}

std::vector<int> sample_spike_train(std::span<const double> rates, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> out(rates.size(), 0);
  for (std::size_t t = 0; t < rates.size(); ++t) {
    if (!(rates[t] >= 0.0) || !std::isfinite(rates[t])) {
      throw DataError("sample_spike_train: rates must be finite and nonnegative");
    }
    if (rates[t] == 0.0) continue;
    std::poisson_distribution<int> draw(rates[t]);
    out[t] = draw(rng);
  }
  return out;
}

}  // namespace spikeforge
