#include "diqkd/spdc_model.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "diqkd/errors.hpp"

namespace diqkd {
namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

void require_unit(double v, const char* name) {
  if (!in_unit(v)) throw ConfigError(std::string(name) + " must lie in [0,1]");
}

}  // namespace

void SpdcParams::validate() const {
  require_unit(r, "r");
  require_unit(visibility, "visibility");
  require_unit(eta_a, "eta_a");
  require_unit(eta_b, "eta_b");
  require_unit(dark_count, "dark_count");
  if (!(mean_photon >= 0.0) || !std::isfinite(mean_photon)) {
    throw ConfigError("mean_photon must be non-negative");
  }
  if (max_pairs < 1) throw ConfigError("max_pairs must be at least 1");
  for (double a : angles_a) {
    if (!std::isfinite(a)) throw ConfigError("non-finite angle");
  }
  for (double a : angles_b) {
    if (!std::isfinite(a)) throw ConfigError("non-finite angle");
  }
}

DensityMatrix4 werner_state(double r, double visibility) {
  require_unit(r, "r");
  require_unit(visibility, "visibility");
  // Basis |HH>, |HV>, |VH>, |VV>.
  Eigen::Vector4cd psi(0.0, 1.0, r, 0.0);
  psi /= std::sqrt(1.0 + r * r);
  DensityMatrix4 rho = visibility * psi * psi.adjoint() +
                       (1.0 - visibility) * DensityMatrix4::Identity() / 4.0;
  const double min_eig =
      Eigen::SelfAdjointEigenSolver<DensityMatrix4>(rho, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff();
  if (min_eig < -1e-10) throw ConfigError("Werner state is not positive semidefinite");
  return rho;
}

Effect2 measurement_effect(double phi, double eta, double dark_count) {
  require_unit(eta, "eta");
  require_unit(dark_count, "dark_count");
  Effect2 pi;
  pi << std::cos(phi), std::sin(phi), std::sin(phi), -std::cos(phi);
  const Effect2 id = Effect2::Identity();
  const double click = 1.0 - (1.0 - dark_count) * (1.0 - eta);
  return click * (id + pi) / 2.0 + dark_count * (id - pi) / 2.0;
}

BetaTensor BetaTensor::click_union() {
  // Outcome index i = 2a + b with 0 = click. A combined party clicks if
  // either pair clicks, so the combined bit is the AND of the bits.
  std::array<Matrix, 4> beta{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const int a = (i >> 1) & (j >> 1);
      const int b = (i & 1) & (j & 1);
      beta[2 * a + b][i][j] = 1;
    }
  }
  return BetaTensor(beta);
}

BetaTensor::BetaTensor(const std::array<Matrix, 4>& beta) : beta_(beta) {
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      int total = 0;
      for (int k = 0; k < 4; ++k) {
        if (beta[k][i][j] != 0 && beta[k][i][j] != 1) {
          throw ConfigError("beta entries must be 0 or 1");
        }
        total += beta[k][i][j];
      }
      if (total != 1) throw ConfigError("beta matrices do not partition the outcome pairs");
    }
  }
}

OutcomeDist single_pair_probs(const SpdcParams& params, int x, int y) {
  const DensityMatrix4 rho = werner_state(params.r, params.visibility);
  const Effect2 a0 = measurement_effect(params.angles_a.at(x), params.eta_a, params.dark_count);
  const Effect2 b0 = measurement_effect(params.angles_b.at(y), params.eta_b, params.dark_count);
  const Effect2 id = Effect2::Identity();
  const std::array<Effect2, 2> ea{a0, id - a0};
  const std::array<Effect2, 2> eb{b0, id - b0};
  OutcomeDist p{};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const Eigen::Matrix4cd op = Eigen::kroneckerProduct(ea[a], eb[b]);
      p[outcome_index(a, b)] = std::max(0.0, (rho * op).trace().real());
    }
  }
  return p;
}

OutcomeDist multipair_combine(const OutcomeDist& p, const OutcomeDist& q,
                              const BetaTensor& beta) {
  OutcomeDist out{};
  for (int k = 0; k < 4; ++k) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (beta(k, i, j)) s += p[i] * q[j];
      }
    }
    out[k] = s;
  }
  return out;
}

OutcomeDist zero_pair_probs(double dark_count) {
  const double d = dark_count;
  return {d * d, d * (1.0 - d), d * (1.0 - d), (1.0 - d) * (1.0 - d)};
}

Behavior behavior_from_model(const SpdcParams& params) {
  params.validate();
  const BetaTensor beta = BetaTensor::click_union();
  const double u = params.mean_photon;
  std::array<OutcomeDist, kSettings> rows{};
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      const OutcomeDist single = single_pair_probs(params, x, y);
      OutcomeDist acc = zero_pair_probs(params.dark_count);
      double weight = std::exp(-u);
      double mass = weight;
      for (double& v : acc) v *= weight;
      OutcomeDist n_pairs = single;
      for (int n = 1; n <= params.max_pairs; ++n) {
        if (n > 1) n_pairs = multipair_combine(n_pairs, single, beta);
        weight *= u / n;
        mass += weight;
        for (int k = 0; k < 4; ++k) acc[k] += weight * n_pairs[k];
      }
      double total = 0.0;
      for (double& v : acc) {
        v /= mass;
        total += v;
      }
      // Absorb the rounding left after renormalization into the largest entry.
      auto& largest = *std::max_element(acc.begin(), acc.end());
      largest += 1.0 - total;
      rows[setting_index(x, y)] = acc;
    }
  }
  return Behavior::from_settings(rows);
}

double fidelity_to_visibility(double fidelity) {
  if (!(fidelity >= 0.25 && fidelity <= 1.0)) {
    throw ConfigError("fidelity must lie in [0.25, 1]");
  }
  return (4.0 * fidelity - 1.0) / 3.0;
}

}  // namespace diqkd
