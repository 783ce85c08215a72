#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bvc/errors.hpp"
#include "bvc/rng.hpp"

namespace bvc {

enum class MapKind { kDoubling, kQuadratic, kViana };

inline const char* to_string(MapKind k) {
    switch (k) {
        case MapKind::kDoubling: return "doubling";
        case MapKind::kQuadratic: return "quadratic";
        default: return "viana";
    }
}

// Phase-space point. One-dimensional systems use x0 only; circle coordinates
// are stored reduced into [0,1). The viana skew product uses (x0, x1) = (s, x).
struct Point {
    double x0 = 0.0;
    double x1 = 0.0;
};

inline double reduce_mod1(double s) {
    double r = s - std::floor(s);
    if (r >= 1.0) r -= 1.0; // rounding can land exactly on 1
    return r;
}

// distance on R/Z
inline double circle_dist(double a, double b) {
    const double d = std::fabs(reduce_mod1(a) - reduce_mod1(b));
    return d < 1.0 - d ? d : 1.0 - d;
}

// |det Df| below this floor counts as a critical-set hit; log_jacobian then
// returns the sentinel and orbit accumulation marks the record degenerate.
inline constexpr double kDegeneracyFloor = 1e-300;
inline constexpr double kNegativeDegenerate = -std::numeric_limits<double>::infinity();

inline bool is_degenerate_log(double v) { return std::isinf(v) && v < 0.0; }

// guard against runaway horizons in hitting/orbit scans
inline constexpr int kOrbitHorizonLimit = 1 << 20;

struct OrbitRecord {
    std::vector<Point> points;       // x, f(x), ..., f^n(x)
    std::vector<double> cum_log_jac; // S_k = sum_{i<k} log|det Df(f^i(x))|; S_0 = 0
    bool degenerate = false;         // some factor fell below the degeneracy floor
};

struct PreimageBranch {
    Point point;
    int branch_id = 0;
    int multiplicity = 1; // 2 for the quadratic double root at y = 1
};

// A smooth map with forward evaluation, log |det Df|, and exact inverse-branch
// enumeration. Immutable after construction; all operations are pure.
//
//   doubling(d):   x -> d*x (mod 1) on the circle
//   quadratic(a):  x -> 1 - a*x^2 on [-1, 1], 0 < a <= 2
//   viana(...):    (s, x) -> (d*s mod 1, a0 + alpha*sin(2*pi*s) - x^2)
//                  on S^1 x [lo, hi]; the fiber interval must be forward
//                  invariant, which construction checks on a sample grid.
class MapSystem {
public:
    static MapSystem doubling(int d) {
        if (d < 2) throw config_error("doubling: degree must be >= 2");
        MapSystem m;
        m.kind_ = MapKind::kDoubling;
        m.d_ = d;
        m.sup_log_jac_ = std::log(static_cast<double>(d));
        return m;
    }

    static MapSystem quadratic(double a) {
        if (!(a > 0.0) || !(a <= 2.0)) throw config_error("quadratic: need a in (0, 2]");
        MapSystem m;
        m.kind_ = MapKind::kQuadratic;
        m.a_ = a;
        m.sup_log_jac_ = std::log(2.0 * a); // sup of 2a|x| on [-1, 1]
        return m;
    }

    static MapSystem viana(double a0, double alpha_pert, int d, double lo, double hi) {
        if (!(a0 > 1.0) || !(a0 < 2.0)) throw config_error("viana: need a0 in (1, 2)");
        if (!(alpha_pert > 0.0)) throw config_error("viana: need alpha_pert > 0");
        if (d < 2) throw config_error("viana: degree must be >= 2");
        if (!(-2.0 < lo) || !(lo < hi) || !(hi < 2.0))
            throw config_error("viana: need -2 < lo < hi < 2");
        MapSystem m;
        m.kind_ = MapKind::kViana;
        m.d_ = d;
        m.a0_ = a0;
        m.alpha_ = alpha_pert;
        m.lo_ = lo;
        m.hi_ = hi;
        const double edge = std::fabs(lo) > std::fabs(hi) ? std::fabs(lo) : std::fabs(hi);
        m.sup_log_jac_ = std::log(2.0 * d * edge);
        m.check_viana_invariance();
        return m;
    }

    MapKind kind() const { return kind_; }
    int dimension() const { return kind_ == MapKind::kViana ? 2 : 1; }
    double sup_log_jac() const { return sup_log_jac_; }
    int circle_degree() const { return d_; }
    double quad_a() const { return a_; }
    double viana_a0() const { return a0_; }
    double viana_alpha() const { return alpha_; }
    double fiber_lo() const { return lo_; }
    double fiber_hi() const { return hi_; }

    // exact per-point bound on the number of inverse branches
    int max_branching() const {
        switch (kind_) {
            case MapKind::kDoubling: return d_;
            case MapKind::kQuadratic: return 2;
            default: return 2 * d_;
        }
    }

    // branch count guaranteed by the circle factor alone; viana fiber roots
    // vary from 0 to 2 per circle branch
    int nominal_branching() const { return kind_ == MapKind::kQuadratic ? 2 : d_; }

    bool in_domain(const Point& p) const {
        switch (kind_) {
            case MapKind::kDoubling: return p.x0 >= 0.0 && p.x0 < 1.0;
            case MapKind::kQuadratic: return p.x0 >= -1.0 && p.x0 <= 1.0;
            default:
                return p.x0 >= 0.0 && p.x0 < 1.0 && p.x1 >= lo_ && p.x1 <= hi_;
        }
    }

    Point evaluate(const Point& p) const {
        require_domain(p);
        switch (kind_) {
            case MapKind::kDoubling:
                return {reduce_mod1(static_cast<double>(d_) * p.x0), 0.0};
            case MapKind::kQuadratic:
                return {1.0 - a_ * p.x0 * p.x0, 0.0};
            default: {
                const double s = reduce_mod1(static_cast<double>(d_) * p.x0);
                const double x = fiber_map(p.x0, p.x1);
                return {s, x};
            }
        }
    }

    // log |det Df| at p; kNegativeDegenerate below the degeneracy floor
    double log_jacobian(const Point& p) const {
        require_domain(p);
        switch (kind_) {
            case MapKind::kDoubling:
                return sup_log_jac_; // constant log d
            case MapKind::kQuadratic: {
                const double t = 2.0 * a_ * std::fabs(p.x0);
                return t < kDegeneracyFloor ? kNegativeDegenerate : std::log(t);
            }
            default: {
                // Df is lower triangular: det = d * (-2x)
                const double t = 2.0 * d_ * std::fabs(p.x1);
                return t < kDegeneracyFloor ? kNegativeDegenerate : std::log(t);
            }
        }
    }

    OrbitRecord orbit(const Point& x, int n) const {
        if (n < 0 || n > kOrbitHorizonLimit) throw config_error("orbit: bad length");
        OrbitRecord rec;
        rec.points.reserve(static_cast<std::size_t>(n) + 1);
        rec.cum_log_jac.reserve(static_cast<std::size_t>(n) + 1);
        rec.points.push_back(x);
        rec.cum_log_jac.push_back(0.0);
        Point p = x;
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
            const double lj = log_jacobian(p);
            if (is_degenerate_log(lj)) rec.degenerate = true;
            s += lj; // stays -inf once degenerate
            p = evaluate(p);
            rec.points.push_back(p);
            rec.cum_log_jac.push_back(s);
        }
        return rec;
    }

    // All solutions of f(x) = y inside the domain, deterministically ordered
    // by branch_id. For viana, `discarded` (when given) counts fiber roots
    // rejected for landing outside [lo, hi].
    std::vector<PreimageBranch> preimages(const Point& y, int* discarded = nullptr) const {
        require_domain(y);
        if (discarded) *discarded = 0;
        std::vector<PreimageBranch> out;
        switch (kind_) {
            case MapKind::kDoubling: {
                out.reserve(static_cast<std::size_t>(d_));
                for (int k = 0; k < d_; ++k) {
                    out.push_back({{(y.x0 + k) / d_, 0.0}, k, 1});
                }
                return out;
            }
            case MapKind::kQuadratic: {
                const double r = (1.0 - y.x0) / a_;
                if (r < 0.0 || r > 1.0) return out; // no root inside [-1, 1]
                if (r == 0.0) {
                    out.push_back({{0.0, 0.0}, 0, 2}); // double root at y = 1
                    return out;
                }
                const double root = std::sqrt(r);
                out.push_back({{root, 0.0}, 0, 1});
                out.push_back({{-root, 0.0}, 1, 1});
                return out;
            }
            default: {
                for (int k = 0; k < d_; ++k) {
                    const double s = (y.x0 + k) / d_;
                    const double rad = a_of(s) - y.x1;
                    if (rad < 0.0) continue;
                    if (rad == 0.0) {
                        if (0.0 >= lo_ && 0.0 <= hi_) {
                            out.push_back({{s, 0.0}, 2 * k, 2});
                        } else if (discarded) {
                            ++*discarded;
                        }
                        continue;
                    }
                    const double root = std::sqrt(rad);
                    if (root >= lo_ && root <= hi_) {
                        out.push_back({{s, root}, 2 * k, 1});
                    } else if (discarded) {
                        ++*discarded;
                    }
                    if (-root >= lo_ && -root <= hi_) {
                        out.push_back({{s, -root}, 2 * k + 1, 1});
                    } else if (discarded) {
                        ++*discarded;
                    }
                }
                return out;
            }
        }
    }

    // one draw from normalized Lebesgue on the domain
    Point sample(const CounterRng& rng, std::uint64_t stream, std::uint64_t index) const {
        switch (kind_) {
            case MapKind::kDoubling:
                return {rng.uniform(stream, index, 0), 0.0};
            case MapKind::kQuadratic:
                return {2.0 * rng.uniform(stream, index, 0) - 1.0, 0.0};
            default:
                return {rng.uniform(stream, index, 0),
                        rng.uniform_in(lo_, hi_, stream, index, 1)};
        }
    }

    std::string describe() const {
        switch (kind_) {
            case MapKind::kDoubling: return "doubling(d=" + std::to_string(d_) + ")";
            case MapKind::kQuadratic: return "quadratic(a=" + std::to_string(a_) + ")";
            default:
                return "viana(a0=" + std::to_string(a0_) + ", alpha=" + std::to_string(alpha_) +
                       ", d=" + std::to_string(d_) + ", I=[" + std::to_string(lo_) + ", " +
                       std::to_string(hi_) + "])";
        }
    }

private:
    MapSystem() = default;

    void require_domain(const Point& p) const {
        if (!in_domain(p)) {
            throw std::domain_error("point (" + std::to_string(p.x0) + ", " +
                                    std::to_string(p.x1) + ") outside domain of " + describe());
        }
    }

    double a_of(double s) const { return a0_ + alpha_ * std::sin(2.0 * std::numbers::pi * s); }
    double fiber_map(double s, double x) const { return a_of(s) - x * x; }

    // f(S^1 x I) must stay inside S^1 x I; sampled over a grid that includes
    // the circle positions extremizing a(s) and the fiber points extremizing
    // x^2.
    void check_viana_invariance() const {
        constexpr int kGrid = 256;
        for (int i = 0; i <= kGrid + 2; ++i) {
            double s;
            if (i == kGrid + 1) {
                s = 0.25; // max of sin
            } else if (i == kGrid + 2) {
                s = 0.75; // min of sin
            } else {
                s = static_cast<double>(i) / (kGrid + 1);
            }
            for (int j = 0; j <= kGrid + 2; ++j) {
                double x;
                if (j == kGrid + 1) {
                    x = 0.0;
                } else if (j == kGrid + 2) {
                    x = std::fabs(lo_) > std::fabs(hi_) ? lo_ : hi_;
                } else {
                    x = lo_ + (hi_ - lo_) * static_cast<double>(j) / kGrid;
                }
                const double image = fiber_map(s, x);
                if (image < lo_ || image > hi_) {
                    throw config_error(
                        "viana: fiber interval [" + std::to_string(lo_) + ", " +
                        std::to_string(hi_) + "] is not forward invariant (q(" +
                        std::to_string(s) + ", " + std::to_string(x) + ") = " +
                        std::to_string(image) + ")");
                }
            }
        }
    }

    MapKind kind_ = MapKind::kDoubling;
    int d_ = 2;
    double a_ = 2.0;
    double a0_ = 0.0;
    double alpha_ = 0.0;
    double lo_ = 0.0;
    double hi_ = 0.0;
    double sup_log_jac_ = 0.0;
};

} // namespace bvc
