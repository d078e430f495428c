#include "ratstab/sysmodel.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <random>

#include "ratstab/error.hpp"
#include "ratstab/expr.hpp"

namespace ratstab {
namespace {

constexpr std::array<double, 5> kUGrid = {-10.0, -1.0, 0.0, 1.0, 10.0};

// Parses the numeric suffix of x<i>/xd<i>; returns 0 for u and t.
std::size_t variable_index(std::string_view name) {
  std::string_view digits;
  if (name.starts_with("xd"))
    digits = name.substr(2);
  else if (name.starts_with("x"))
    digits = name.substr(1);
  else
    return 0;
  std::size_t idx = 0;
  std::from_chars(digits.data(), digits.data() + digits.size(), idx);
  return idx;
}

}  // namespace

DomainBox DomainBox::symmetric(std::size_t n, double half_width, double u_half_width) {
  DomainBox b;
  b.x.assign(n, {-half_width, half_width});
  b.u = {-u_half_width, u_half_width};
  return b;
}

Nonlinearity::Nonlinearity(std::string name, std::size_t dim, Fn fn, bool structurally_triangular)
    : name_(std::move(name)),
      dim_(dim),
      fn_(std::make_shared<const Fn>(std::move(fn))),
      structural_(structurally_triangular) {
  if (dim_ < 1 || dim_ > kMaxDim) throw ConfigError("nonlinearity dimension outside [1, 16]");
}

Vector Nonlinearity::operator()(std::span<const double> x, std::span<const double> xd,
                                double u) const {
  Vector out(dim_, 0.0);
  (*this)(x, xd, u, out);
  return out;
}

std::vector<std::string> registry_names() { return {"zero", "paper_example"}; }

Nonlinearity make_nonlinearity(std::string_view registry_name, std::size_t n) {
  if (n < 1 || n > kMaxDim) throw ConfigError("nonlinearity dimension outside [1, 16]");
  if (registry_name == "zero") {
    return Nonlinearity("zero", n,
                        [](std::span<const double>, std::span<const double>, double,
                           std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); },
                        false);
  }
  if (registry_name == "paper_example") {
    return Nonlinearity("paper_example", n,
                        [](std::span<const double> x, std::span<const double> xd, double u,
                           std::span<double> out) {
                          std::fill(out.begin(), out.end(), 0.0);
                          out[0] = x[0] * std::cos(x[0]) + xd[0] * std::cos(u);
                        },
                        false);
  }
  throw ValidationError("unknown nonlinearity registry name '" + std::string(registry_name) + "'");
}

Nonlinearity make_nonlinearity(std::span<const std::string> expressions) {
  const std::size_t n = expressions.size();
  if (n < 1 || n > kMaxDim) throw ConfigError("nonlinearity needs between 1 and 16 components");

  // Slot layout: x1..xn, xd1..xdn, u.
  const auto resolve = [n](std::string_view name) -> std::optional<std::size_t> {
    if (name == "u") return 2 * n;
    const std::size_t idx = variable_index(name);
    if (idx < 1 || idx > n) return std::nullopt;
    return name.starts_with("xd") ? n + idx - 1 : idx - 1;
  };

  auto programs = std::make_shared<std::vector<expr::Program>>();
  for (std::size_t i = 0; i < n; ++i) {
    const expr::Expr e = expr::parse(expressions[i]);
    for (const std::string& v : expr::free_vars(e)) {
      if (v == "t")
        throw ValidationError("component " + std::to_string(i + 1) +
                              " references 't'; the nonlinearity must be time invariant");
      if (v == "u") continue;
      const std::size_t idx = variable_index(v);
      if (idx > i + 1)
        throw ValidationError("component " + std::to_string(i + 1) + " references " + v +
                              ", violating the triangular structure");
    }
    programs->push_back(expr::Program::compile(e, resolve));
  }

  std::string name = "expr[";
  for (std::size_t i = 0; i < n; ++i) name += (i ? "; " : "") + expressions[i];
  name += "]";

  return Nonlinearity(
      std::move(name), n,
      [programs, n](std::span<const double> x, std::span<const double> xd, double u,
                    std::span<double> out) {
        std::array<double, 2 * kMaxDim + 1> slots{};
        std::copy_n(x.begin(), n, slots.begin());
        std::copy_n(xd.begin(), n, slots.begin() + static_cast<std::ptrdiff_t>(n));
        slots[2 * n] = u;
        for (std::size_t i = 0; i < n; ++i) out[i] = (*programs)[i].run(slots);
      },
      true);
}

void probe_triangularity(const Nonlinearity& f, std::uint64_t seed) {
  const std::size_t n = f.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-5.0, 5.0);
  Vector x(n), xd(n), out0(n), out1(n);
  for (int trial = 0; trial < 64; ++trial) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = coord(rng);
      xd[i] = coord(rng);
    }
    const double u = coord(rng);
    f(x, xd, u, out0);
    for (std::size_t j = 1; j < n; ++j) {
      for (int which = 0; which < 2; ++which) {
        Vector xp = x, xdp = xd;
        (which == 0 ? xp : xdp)[j] += 1.0 + coord(rng);
        f(xp, xdp, u, out1);
        for (std::size_t i = 0; i < j; ++i) {
          const double scale = std::max(1.0, std::fabs(out0[i]));
          if (std::fabs(out1[i] - out0[i]) > 1e-12 * scale)
            throw ValidationError("component " + std::to_string(i + 1) + " depends on " +
                                  (which == 0 ? "x" : "xd") + std::to_string(j + 1) +
                                  ", violating the triangular structure");
        }
      }
    }
  }
}

void check_zero_equilibrium(const Nonlinearity& f) {
  const Vector zero(f.dim(), 0.0);
  for (double u : kUGrid) {
    const Vector v = f(zero, zero, u);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!(std::fabs(v[i]) <= 1e-12))
        throw ValidationError("f(0, 0, u) != 0 at u = " + std::to_string(u) + " (component " +
                              std::to_string(i + 1) + ")");
  }
}

SystemSpec::SystemSpec(std::size_t n, double tau, Nonlinearity f, double lipschitz_k,
                       DomainBox box)
    : n_(n), tau_(tau), f_(std::move(f)), k_(lipschitz_k), box_(std::move(box)),
      abc_(build_companion(n)) {
  if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw ConfigError("delay tau must be positive");
  if (!(k_ >= 0.0) || !std::isfinite(k_)) throw ConfigError("lipschitz_k must be >= 0");
  if (f_.dim() != n_)
    throw ConfigError("nonlinearity has " + std::to_string(f_.dim()) + " components, expected " +
                      std::to_string(n_));
  if (box_.x.empty()) box_ = DomainBox::symmetric(n_, 10.0);
  if (box_.x.size() != n_) throw ConfigError("domain_box must have one interval per state");
  check_zero_equilibrium(f_);
  if (!f_.structurally_triangular()) probe_triangularity(f_);
}

ScaledGains scale_gains(std::span<const double> L, std::span<const double> K, double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ConfigError("theta must be positive");
  if (L.size() != K.size() || L.empty()) throw ConfigError("L and K must have equal length n >= 1");
  const std::size_t n = L.size();
  ScaledGains s{Vector(n), Vector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    s.L[i] = L[i] * std::pow(theta, static_cast<double>(i + 1));
    s.K[i] = K[i] * std::pow(theta, static_cast<double>(n - i));
  }
  return s;
}

GainSet::GainSet(Vector L, Vector K, double theta)
    : L_(std::move(L)), K_(std::move(K)), theta_(theta), scaled_(scale_gains(L_, K_, theta_)) {
  for (double v : L_)
    if (!std::isfinite(v)) throw ConfigError("observer gain L has non-finite entries");
  for (double v : K_)
    if (!std::isfinite(v)) throw ConfigError("feedback gain K has non-finite entries");
  if (!is_hurwitz(A_L())) throw NotHurwitz("A + LC is not Hurwitz");
  if (!is_hurwitz(A_K())) throw NotHurwitz("A + BK is not Hurwitz");
}

Matrix GainSet::A_L() const {
  const Companion c = build_companion(L_.size());
  return c.A + outer(L_, c.C);
}

Matrix GainSet::A_K() const {
  const Companion c = build_companion(K_.size());
  return c.A + outer(c.B, K_);
}

double estimate_lipschitz(const Nonlinearity& f, const DomainBox& box, std::size_t samples,
                          std::uint64_t seed) {
  const std::size_t n = f.dim();
  if (samples < 100) throw ConfigError("estimate_lipschitz needs at least 100 samples");
  if (box.x.size() != n) throw ConfigError("domain box dimension does not match f");
  for (const auto& [lo, hi] : box.x)
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw ConfigError("domain box interval is empty or inverted");
  if (!(box.u.first <= box.u.second)) throw ConfigError("domain box u interval is inverted");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto draw = [&](std::size_t i) {
    return box.x[i].first + (box.x[i].second - box.x[i].first) * unit(rng);
  };
  const auto draw_u = [&] { return box.u.first + (box.u.second - box.u.first) * unit(rng); };

  Vector x(n), xd(n), x2(n), xd2(n), f1(n), f2(n), diff(n);
  double k_state = 0.0, k_delayed = 0.0;

  const auto ratio = [&](std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += (f1[i] - f2[i]) * (f1[i] - f2[i]);
      den += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
  };

  // Finite-difference step relative to the coordinate width, stepping inward
  // at the upper face so probes stay inside the box.
  const auto fd_probe = [&](double u) {
    f(x, xd, u, f1);
    for (std::size_t j = 0; j < n; ++j) {
      for (int which = 0; which < 2; ++which) {
        const double width = box.x[j].second - box.x[j].first;
        if (width <= 0.0) continue;
        const double delta = 1e-6 * std::max(1.0, width);
        Vector& base = which == 0 ? x : xd;
        const double saved = base[j];
        const double moved = saved + delta <= box.x[j].second ? saved + delta : saved - delta;
        base[j] = moved;
        f(x, xd, u, f2);
        base[j] = saved;
        double num = 0.0;
        for (std::size_t i = 0; i < n; ++i) num += (f2[i] - f1[i]) * (f2[i] - f1[i]);
        const double r = std::sqrt(num) / std::fabs(moved - saved);
        (which == 0 ? k_state : k_delayed) = std::max(which == 0 ? k_state : k_delayed, r);
      }
    }
  };

  // Random secant pairs that differ only in x, or only in xd.
  const std::size_t n_pairs = samples / 2;
  for (std::size_t s = 0; s < n_pairs; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = draw(i);
      xd[i] = draw(i);
      x2[i] = draw(i);
      xd2[i] = draw(i);
    }
    const double u = draw_u();
    f(x, xd, u, f1);
    f(x2, xd, u, f2);
    k_state = std::max(k_state, ratio(x, x2));
    f(x, xd2, u, f2);
    k_delayed = std::max(k_delayed, ratio(xd, xd2));
  }

  // Finite-difference probes at random interior points.
  for (std::size_t s = 0; s < samples - n_pairs; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = draw(i);
      xd[i] = draw(i);
    }
    fd_probe(draw_u());
  }

  // Axis scans through the box centre, endpoints included, over a few u values.
  const std::size_t scan = std::max<std::size_t>(samples / 10, 11);
  const double u_mid = 0.5 * (box.u.first + box.u.second);
  const std::array<double, 3> u_scan = {box.u.first, u_mid, box.u.second};
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t s = 0; s < scan; ++s) {
      const double frac = static_cast<double>(s) / static_cast<double>(scan - 1);
      const double v = box.x[j].first + frac * (box.x[j].second - box.x[j].first);
      for (double u : u_scan) {
        for (std::size_t i = 0; i < n; ++i) x[i] = xd[i] = 0.5 * (box.x[i].first + box.x[i].second);
        x[j] = v;
        xd[j] = v;
        fd_probe(u);
      }
    }
  }
  return std::max(k_state, k_delayed);
}

}  // namespace ratstab
