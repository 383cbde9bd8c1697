// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
//
// Collision transforms, the bath Maxwellian, collision frequencies and the
// explicit scattering / gain kernels of the thermostatted inelastic
// hard-sphere model.
#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

#include "granbath/quadrature.hpp"

namespace granbath {

using Velocity = Eigen::Vector3d;

class DensityEstimate;
class RadialProfile;

/// Raised when a kernel is evaluated on its diagonal v == w.
class SingularPointError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a calibration or quadrature cannot meet its tolerance.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Restitution coefficient alpha in (0, 1] and mu_alpha = 2(1-alpha)/(1+alpha).
class RestitutionParams {
 public:
  explicit RestitutionParams(double alpha);

  double alpha() const { return alpha_; }
  double mu() const { return 2.0 * (1.0 - alpha_) / (1.0 + alpha_); }
  /// (1 + alpha) / 4, the fraction of |q| sigma - q transferred per collision.
  double transfer() const { return 0.25 * (1.0 + alpha_); }
  bool elastic() const { return alpha_ == 1.0; }

 private:
  double alpha_;
};

/// Host-medium Maxwellian with unit mass.
struct BathMaxwellian {
  Velocity u0 = Velocity::Zero();
  double theta0 = 1.0;

  BathMaxwellian() = default;
  BathMaxwellian(Velocity u, double theta);

  double density(const Velocity& v) const;
  /// Density as a function of |v - u0|.
  double radial_density(double r) const;
};

/// Exponential weight m(v) = exp(-a|v|) and the X / Y norms built on it.
struct WeightSpec {
  double a = 0.5;

  WeightSpec() = default;
  explicit WeightSpec(double a_);

  double inverse_weight(double speed) const;          // m^{-1}
  double y_inverse_weight(double speed) const;        // <v> m^{-1}
  static double bracket(double speed);                // <v> = sqrt(1 + |v|^2)
};

struct KernelConstants {
  double C0 = 0.0;
  double beta0 = 0.0;
  Velocity u0 = Velocity::Zero();
  double theta0 = 1.0;
  double calibration_spread = 0.0;

  // Dominating kernel built on an upper Maxwellian of mass mbar.
  double Cbar_alpha = 0.0;
  double beta1 = 0.0;
  Velocity u1 = Velocity::Zero();
  double theta1 = 1.0;
};

void to_json(nlohmann::json& j, const KernelConstants& c);
void from_json(const nlohmann::json& j, KernelConstants& c);

// ---------------------------------------------------------------------------
// Collision transforms

/// Post-collisional pair (v', w') of an inelastic collision.
std::pair<Velocity, Velocity> inelastic_transform(const Velocity& v, const Velocity& w, const Velocity& sigma,
                                                  const RestitutionParams& params);

/// Post-collisional pair (v*, w*) of an elastic collision with a bath particle.
std::pair<Velocity, Velocity> elastic_bath_transform(const Velocity& v, const Velocity& w, const Velocity& sigma);

/// Change of |v|^2 + |w|^2 produced by inelastic_transform.
double energy_loss(const Velocity& v, const Velocity& w, const Velocity& sigma, const RestitutionParams& params);

/// Angular average of psi(v') + psi(w') - psi(v) - psi(w) over the unit sphere.
double angular_average_A(const std::function<double(const Velocity&)>& psi, const Velocity& v, const Velocity& w,
                         const RestitutionParams& params, const SphereQuadrature& sphere);

// ---------------------------------------------------------------------------
// Bath quantities

double maxwellian_density(const BathMaxwellian& M, const Velocity& v);

/// Sigma(v) = int M(w) |v - w| dw by fixed Gauss-Legendre quadrature of the
/// radially reduced integrand.
double collision_frequency_bath(const BathMaxwellian& M, const Velocity& v);
double collision_frequency_bath_radial(const BathMaxwellian& M, double r);

/// sigma(v) = int F(w) |v - w| dw for a binned estimate of F.
/// Throws std::invalid_argument on an empty estimate.
double collision_frequency_state(const DensityEstimate& F, const Velocity& v);

/// Mean of |q| over the relative angle between two shells of radii r and s:
/// ((r+s)^3 - |r-s|^3) / (6 r s).
double shell_mean_speed(double r, double s);

// ---------------------------------------------------------------------------
// Kernels

/// Gain kernel of the linear scattering operator, k(v, w): rate density for a
/// particle at w to scatter to v. Throws SingularPointError for v == w.
double scattering_kernel_k(const Velocity& v, const Velocity& w, const KernelConstants& constants);

/// Chooses C0 such that Sigma(v) = int k(w, v) dw at every probe.
/// Throws CalibrationError if the per-probe constants spread by more than 1e-4.
KernelConstants calibrate_C0(const BathMaxwellian& M, std::span<const Velocity> probes);

/// Fills the dominating-kernel fields for an upper Maxwellian of mass mbar,
/// bulk velocity u1 and temperature theta1.
void set_upper_maxwellian(KernelConstants& constants, const RestitutionParams& params, double mbar,
                          const Velocity& u1, double theta1);

/// Explicit dominating kernel for Q_alpha^+(h, Mbar).
double gain_kernel_upper(const Velocity& v, const Velocity& w, const RestitutionParams& params,
                         const KernelConstants& constants);

/// Normalization of the K^1 kernel: 4 / (pi (1 + alpha)^2).
double gain_constant_C_alpha(const RestitutionParams& params);

/// Calibrates C_alpha from int K^1(v, w) dv = sigma_alpha(w) at the probe speeds.
/// Returns {C_alpha, max relative spread}.
std::pair<double, double> calibrate_C_alpha(const RestitutionParams& params, const RadialProfile& F,
                                            std::span<const double> probe_speeds);

/// Plane integral of F over {z : (z - p0) . n = 0}.
struct PlaneQuadrature {
  std::size_t nodes = 32;
  double envelope_theta = 1.0;  // temperature of the Gaussian factored out of F
  Velocity envelope_center = Velocity::Zero();
};

/// K^1_alpha(v, w) for a pointwise-evaluable F by tensor Gauss-Hermite on the plane.
double gain_kernel_K1(const Velocity& v, const Velocity& w, const RestitutionParams& params,
                      const std::function<double(const Velocity&)>& F, double C_alpha,
                      const PlaneQuadrature& plane = {});

/// K^1_alpha(v, w) for a radial F, using the exact plane integral 2 pi int_d^inf F(x) x dx.
double gain_kernel_K1(const Velocity& v, const Velocity& w, const RestitutionParams& params, const RadialProfile& F,
                      double C_alpha);

/// Angular reduction of K^1_alpha: int over directions of w at fixed |v| = r, |w| = s
/// (F radial about the origin). Integrable diagonal handled by the |v-w| substitution.
double gain_kernel_K1_shell(double r, double s, const RestitutionParams& params, const RadialProfile& F,
                            double C_alpha, std::size_t order = 48);

/// Same reduction for the scattering kernel k (bath at the origin).
double scattering_kernel_shell(double r, double s, const KernelConstants& constants, std::size_t order = 48);

}  // namespace granbath
