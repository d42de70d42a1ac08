#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "patas/log.hpp"

namespace patas::sl {

inline constexpr double kOpinionTol = 1e-9;
inline constexpr double kDefaultBaseRate = 0.5;

/// Binomial subjective opinion (belief, disbelief, uncertainty, base rate).
/// The mass triple is renormalized to sum to exactly 1 on construction; all
/// components live in [0, 1].
class Opinion {
  public:
    Opinion() : b_(0), d_(0), u_(1), a_(kDefaultBaseRate) {}

    Opinion(double b, double d, double u, double a = kDefaultBaseRate) {
        if (!std::isfinite(b) || !std::isfinite(d) || !std::isfinite(u) || !std::isfinite(a))
            throw std::invalid_argument("Opinion: non-finite component");
        // tolerate tiny negative drift from upstream arithmetic
        b = clamp_mass(b);
        d = clamp_mass(d);
        u = clamp_mass(u);
        if (a < 0.0 || a > 1.0)
            throw std::invalid_argument("Opinion: base rate outside [0,1]");
        const double s = b + d + u;
        if (s <= 0.0)
            throw std::invalid_argument("Opinion: mass triple sums to zero");
        b_ = b / s;
        d_ = d / s;
        u_ = u / s;
        a_ = a;
    }

    double belief() const { return b_; }
    double disbelief() const { return d_; }
    double uncertainty() const { return u_; }
    double base_rate() const { return a_; }

    static Opinion vacuous(double a = kDefaultBaseRate) { return Opinion(0, 0, 1, a); }
    static Opinion trusted(double a = kDefaultBaseRate) { return Opinion(1, 0, 0, a); }
    static Opinion distrusted(double a = kDefaultBaseRate) { return Opinion(0, 1, 0, a); }

    bool operator==(const Opinion& o) const {
        return b_ == o.b_ && d_ == o.d_ && u_ == o.u_ && a_ == o.a_;
    }

  private:
    static double clamp_mass(double v) {
        if (v < 0.0) {
            if (v < -kOpinionTol) throw std::invalid_argument("Opinion: negative mass component");
            return 0.0;
        }
        return v;
    }

    double b_, d_, u_, a_;
};

/// Positive/negative evidence counts feeding the quantification models.
struct Evidence {
    double positive = 0;
    double negative = 0;

    Evidence(double r, double s) : positive(r), negative(s) {
        if (!std::isfinite(r) || !std::isfinite(s) || r < 0 || s < 0)
            throw std::invalid_argument("Evidence: counts must be finite and >= 0");
    }
};

inline bool approx_equal(const Opinion& a, const Opinion& b, double tol = kOpinionTol) {
    return std::abs(a.belief() - b.belief()) <= tol &&
           std::abs(a.disbelief() - b.disbelief()) <= tol &&
           std::abs(a.uncertainty() - b.uncertainty()) <= tol &&
           std::abs(a.base_rate() - b.base_rate()) <= tol;
}

/// Projected probability P = b + a*u.
inline double project(const Opinion& op) {
    return op.belief() + op.base_rate() * op.uncertainty();
}

/// Baseline-prior quantification: uncertainty W/(W+r+s).
inline Opinion quantify_baseline(const Evidence& ev, double W, double base_rate = kDefaultBaseRate) {
    if (!(W > 0)) throw std::invalid_argument("quantify_baseline: W must be > 0");
    const double denom = W + ev.positive + ev.negative;
    return Opinion(ev.positive / denom, ev.negative / denom, W / denom, base_rate);
}

/// Evidence-weighted quantification: uncertainty scaled by w.
inline Opinion quantify_weighted(const Evidence& ev, double w, double base_rate = kDefaultBaseRate) {
    if (!(w > 0)) throw std::invalid_argument("quantify_weighted: w must be > 0");
    const double denom = w + ev.positive + ev.negative;
    return Opinion(ev.positive / denom, ev.negative / denom, w / denom, base_rate);
}

/// Constant-uncertainty quantification: u fixed to U, remaining mass split by
/// evidence ratio.
inline Opinion quantify_constant_u(const Evidence& ev, double U, double base_rate = kDefaultBaseRate) {
    if (!(U > 0) || U > 1) throw std::invalid_argument("quantify_constant_u: U must be in (0,1]");
    const double total = ev.positive + ev.negative;
    if (total <= 0) {
        if (U < 1)
            throw std::invalid_argument("quantify_constant_u: no evidence with U < 1");
        return Opinion(0, 0, 1, base_rate);
    }
    const double gamma = (1.0 - U) / total;
    return Opinion(gamma * ev.positive, gamma * ev.negative, U, base_rate);
}

/// Trust discounting: referral trust scales the functional opinion's committed
/// mass. Result carries the functional opinion's base rate. Absorbs vacuous
/// functional opinions exactly.
inline Opinion discount(const Opinion& referral, const Opinion& functional) {
    const double p = project(referral);
    const double committed = functional.belief() + functional.disbelief();
    return Opinion(p * functional.belief(), p * functional.disbelief(), 1.0 - p * committed,
                   functional.base_rate());
}

namespace detail {

inline double mean_shared_fast(std::span<const double> vals) {
    // exact when every entry is bitwise identical (the common case here)
    bool same = true;
    for (double v : vals)
        if (v != vals[0]) {
            same = false;
            break;
        }
    if (same) return vals[0];
    double s = 0;
    for (double v : vals) s += v;
    return s / static_cast<double>(vals.size());
}

}  // namespace detail

/// n-ary averaging fusion. With all uncertainties positive this is the
/// product-of-others'-uncertainties generalization, computed in the
/// numerically safe harmonic form (weights 1/u_i). If any input is dogmatic
/// (u = 0) the result is the arithmetic mean over the dogmatic subset.
/// Idempotent and order-invariant; base rate is the mean of input base rates.
inline Opinion avg_fuse(std::span<const Opinion> ops) {
    if (ops.empty()) throw std::invalid_argument("avg_fuse: empty input");
    const std::size_t n = ops.size();

    std::vector<double> rates(n);
    for (std::size_t i = 0; i < n; ++i) rates[i] = ops[i].base_rate();
    const double a = detail::mean_shared_fast(rates);

    bool any_dogmatic = false;
    for (const auto& o : ops)
        if (o.uncertainty() == 0.0) {
            any_dogmatic = true;
            break;
        }

    if (any_dogmatic) {
        double b = 0, d = 0;
        std::size_t m = 0;
        for (const auto& o : ops) {
            if (o.uncertainty() != 0.0) continue;
            b += o.belief();
            d += o.disbelief();
            ++m;
        }
        b /= static_cast<double>(m);
        d /= static_cast<double>(m);
        return Opinion(b, d, 1.0 - (b + d), a);
    }

    double wsum = 0, bsum = 0, dsum = 0;
    for (const auto& o : ops) {
        const double w = 1.0 / o.uncertainty();
        wsum += w;
        bsum += o.belief() * w;
        dsum += o.disbelief() * w;
    }
    const double b = bsum / wsum;
    const double d = dsum / wsum;
    const double u = static_cast<double>(n) / wsum;
    return Opinion(b, d, u, a);
}

inline Opinion avg_fuse(std::initializer_list<Opinion> ops) {
    return avg_fuse(std::span<const Opinion>(ops.begin(), ops.size()));
}

inline Opinion avg_fuse(const std::vector<Opinion>& ops) {
    return avg_fuse(std::span<const Opinion>(ops.data(), ops.size()));
}

/// Binary cumulative fusion. Vacuous operands are neutral; the double-dogmatic
/// case degenerates to the equal-rate averaging limit.
inline Opinion cum_fuse(const Opinion& x, const Opinion& y) {
    const double ux = x.uncertainty(), uy = y.uncertainty();
    const double k = ux + uy - ux * uy;
    if (k == 0.0) {
        // both dogmatic
        return Opinion(0.5 * (x.belief() + y.belief()), 0.5 * (x.disbelief() + y.disbelief()), 0.0,
                       0.5 * (x.base_rate() + y.base_rate()));
    }
    const double b = (x.belief() * uy + y.belief() * ux) / k;
    const double d = (x.disbelief() * uy + y.disbelief() * ux) / k;
    const double u = (ux * uy) / k;
    double a;
    const double adenom = ux + uy - 2.0 * ux * uy;
    if (adenom == 0.0) {
        a = 0.5 * (x.base_rate() + y.base_rate());  // both vacuous
    } else {
        a = (x.base_rate() * uy + y.base_rate() * ux -
             (x.base_rate() + y.base_rate()) * ux * uy) /
            adenom;
    }
    return Opinion(b, d, u, a);
}

/// Binomial multiplication (opinion conjunction of independent propositions).
inline Opinion multiply(const Opinion& x, const Opinion& y) {
    const double ax = x.base_rate(), ay = y.base_rate();
    const double denom = 1.0 - ax * ay;
    if (denom <= 0.0)
        throw std::invalid_argument("multiply: base rates a_x = a_y = 1 leave the operator undefined");
    const double b = x.belief() * y.belief() +
                     ((1.0 - ax) * ay * x.belief() * y.uncertainty() +
                      ax * (1.0 - ay) * x.uncertainty() * y.belief()) /
                         denom;
    const double d = x.disbelief() + y.disbelief() - x.disbelief() * y.disbelief();
    const double u = x.uncertainty() * y.uncertainty() +
                     ((1.0 - ay) * x.belief() * y.uncertainty() +
                      (1.0 - ax) * x.uncertainty() * y.belief()) /
                         denom;
    return Opinion(b, d, u, ax * ay);
}

namespace detail {
inline std::size_t& conservative_clamp_count() {
    static std::size_t count = 0;
    return count;
}
}  // namespace detail

/// Conservative combination: min belief, max disbelief, remainder uncertainty.
/// For valid operands min(b)+max(d) <= 1 always holds; the clamp path only
/// fires on float drift and is counted + logged.
inline Opinion conservative(const Opinion& x, const Opinion& y) {
    const double b = std::min(x.belief(), y.belief());
    const double d = std::max(x.disbelief(), y.disbelief());
    double u = 1.0 - (b + d);
    if (u < 0.0) {
        ++detail::conservative_clamp_count();
        patas::warn("conservative: infeasible b/d pair (sum " + std::to_string(b + d) +
                    "), clamping uncertainty to 0");
        return Opinion(1.0 - d, d, 0.0, x.base_rate());
    }
    return Opinion(b, d, u, x.base_rate());
}

/// Binomial deduction. The image of the antecedent simplex is the triangle
/// spanned by the two conditionals and the vacuous-antecedent apex; a general
/// antecedent maps to the barycentric mix with coordinates (b, d, u).
///
/// The apex sits on the projector P = a_x*P(y|x) + (1-a_x)*P(y|not x) with
/// uncertainty maximized subject to the sub-simplex constraints: extra
/// uncertainty K > 0 only arises when the conditionals conflict (one dominates
/// in belief, the other in disbelief), and the apex never drops below the
/// componentwise minima of the conditionals.
inline Opinion deduce(const Opinion& op_x, const Opinion& cond_y, const Opinion& cond_not_y) {
    const double ax = op_x.base_rate();
    const double ay = cond_y.base_rate();

    // vacuous-antecedent image before uncertainty maximization
    double b0 = ax * cond_y.belief() + (1.0 - ax) * cond_not_y.belief();
    double d0 = ax * cond_y.disbelief() + (1.0 - ax) * cond_not_y.disbelief();
    double u0 = ax * cond_y.uncertainty() + (1.0 - ax) * cond_not_y.uncertainty();

    const double db = cond_y.belief() - cond_not_y.belief();
    const double dd = cond_y.disbelief() - cond_not_y.disbelief();
    if ((db > 0 && dd < 0) || (db < 0 && dd > 0)) {
        const double bmin = std::min(cond_y.belief(), cond_not_y.belief());
        const double dmin = std::min(cond_y.disbelief(), cond_not_y.disbelief());
        double k = std::numeric_limits<double>::infinity();
        if (ay > 0) k = std::min(k, (b0 - bmin) / ay);
        if (ay < 1) k = std::min(k, (d0 - dmin) / (1.0 - ay));
        if (std::isfinite(k) && k > 0) {
            b0 -= ay * k;
            d0 -= (1.0 - ay) * k;
            u0 += k;
        }
    }

    const double bx = op_x.belief(), dx = op_x.disbelief(), ux = op_x.uncertainty();
    return Opinion(bx * cond_y.belief() + dx * cond_not_y.belief() + ux * b0,
                   bx * cond_y.disbelief() + dx * cond_not_y.disbelief() + ux * d0,
                   bx * cond_y.uncertainty() + dx * cond_not_y.uncertainty() + ux * u0, ay);
}

/// Euclidean distance over (b, d, u, a) quadruples.
inline double opinion_distance(const Opinion& x, const Opinion& y) {
    const double db = x.belief() - y.belief();
    const double dd = x.disbelief() - y.disbelief();
    const double du = x.uncertainty() - y.uncertainty();
    const double da = x.base_rate() - y.base_rate();
    return std::sqrt(db * db + dd * dd + du * du + da * da);
}

}  // namespace patas::sl
