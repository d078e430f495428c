#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ratstab/matops.hpp"

namespace ratstab {

/// Per-coordinate operating region. The same bounds apply to the current
/// and the delayed state; `u` bounds the input samples.
struct DomainBox {
  std::vector<std::pair<double, double>> x;
  std::pair<double, double> u{-10.0, 10.0};

  static DomainBox symmetric(std::size_t n, double half_width, double u_half_width = 10.0);
};

/// Triangular nonlinearity f(x, x_delayed, u) -> R^n. Immutable, cheap to copy.
class Nonlinearity {
 public:
  using Fn = std::function<void(std::span<const double> x, std::span<const double> xd, double u,
                                std::span<double> out)>;

  Nonlinearity(std::string name, std::size_t dim, Fn fn, bool structurally_triangular);

  std::size_t dim() const noexcept { return dim_; }
  const std::string& name() const noexcept { return name_; }
  /// Expression-backed handles are checked by free variables; registry handles are probed.
  bool structurally_triangular() const noexcept { return structural_; }

  void operator()(std::span<const double> x, std::span<const double> xd, double u,
                  std::span<double> out) const {
    (*fn_)(x, xd, u, out);
  }
  Vector operator()(std::span<const double> x, std::span<const double> xd, double u) const;

 private:
  std::string name_;
  std::size_t dim_;
  std::shared_ptr<const Fn> fn_;
  bool structural_;
};

/// Registry entries: "zero" and "paper_example"
/// (f1 = x1 cos x1 + xd1 cos u, remaining components 0).
Nonlinearity make_nonlinearity(std::string_view registry_name, std::size_t n);

/// One expression per component. Component i may reference x1..xi, xd1..xdi and u.
Nonlinearity make_nonlinearity(std::span<const std::string> expressions);

/// Names accepted by the registry overload.
std::vector<std::string> registry_names();

/// Throws ValidationError if f_i moves when coordinates j > i of x or xd are
/// perturbed (randomised probing, fixed seed).
void probe_triangularity(const Nonlinearity& f, std::uint64_t seed = 0);

/// Throws ValidationError unless f(0, 0, u) = 0 on u in {-10, -1, 0, 1, 10}.
void check_zero_equilibrium(const Nonlinearity& f);

/// Immutable plant description.
class SystemSpec {
 public:
  SystemSpec(std::size_t n, double tau, Nonlinearity f, double lipschitz_k, DomainBox box);

  std::size_t dim() const noexcept { return n_; }
  double tau() const noexcept { return tau_; }
  const Nonlinearity& f() const noexcept { return f_; }
  double lipschitz_k() const noexcept { return k_; }
  const DomainBox& box() const noexcept { return box_; }
  const Companion& companion() const noexcept { return abc_; }

 private:
  std::size_t n_;
  double tau_;
  Nonlinearity f_;
  double k_;
  DomainBox box_;
  Companion abc_;
};

struct ScaledGains {
  Vector L;  // [l1 theta, ..., ln theta^n]
  Vector K;  // [k1 theta^n, ..., kn theta]
};

ScaledGains scale_gains(std::span<const double> L, std::span<const double> K, double theta);

/// Observer and feedback gains with the high-gain parameter. Construction
/// checks that A + LC and A + BK are Hurwitz.
class GainSet {
 public:
  GainSet(Vector L, Vector K, double theta);

  const Vector& L() const noexcept { return L_; }
  const Vector& K() const noexcept { return K_; }
  double theta() const noexcept { return theta_; }
  const Vector& L_scaled() const noexcept { return scaled_.L; }
  const Vector& K_scaled() const noexcept { return scaled_.K; }
  std::size_t dim() const noexcept { return L_.size(); }

  Matrix A_L() const;  // A + L C
  Matrix A_K() const;  // A + B K

 private:
  Vector L_, K_;
  double theta_;
  ScaledGains scaled_;
};

/// Lower bound on k = max(k1, k2), where k1 bounds |f(x,z,u) - f(x',z,u)| / |x - x'|
/// and k2 the same in the delayed argument, sampled over the box. Mixes
/// random secant pairs, finite-difference probes at random points and axis
/// scans through the box centre. Deterministic for a fixed seed.
double estimate_lipschitz(const Nonlinearity& f, const DomainBox& box, std::size_t samples,
                          std::uint64_t seed);

}  // namespace ratstab
