#include "kqsd/domain.hpp"

#include "kqsd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kqsd {

CylindricalDomain CylindricalDomain::interval(double left, double right) {
    if (!(left < right) || !std::isfinite(left) || !std::isfinite(right)) {
        throw ParameterError("interval needs finite left < right");
    }
    CylindricalDomain d;
    d.kind_ = Kind::interval;
    d.dim_ = 1;
    d.left_ = left;
    d.right_ = right;
    return d;
}

CylindricalDomain CylindricalDomain::ball(Vec center, double radius) {
    if (!(radius > 0.0) || !center.allFinite() || center.size() < 1) {
        throw ParameterError("ball needs finite center and radius > 0");
    }
    CylindricalDomain d;
    d.kind_ = Kind::ball;
    d.dim_ = static_cast<int>(center.size());
    d.center_ = std::move(center);
    d.radius_ = radius;
    return d;
}

CylindricalDomain CylindricalDomain::box(Vec lo, Vec hi) {
    if (lo.size() != hi.size() || lo.size() < 1 || !lo.allFinite() || !hi.allFinite() ||
        !((hi - lo).minCoeff() > 0.0)) {
        throw ParameterError("box needs finite lo < hi per coordinate");
    }
    CylindricalDomain d;
    d.kind_ = Kind::box;
    d.dim_ = static_cast<int>(lo.size());
    d.lo_ = std::move(lo);
    d.hi_ = std::move(hi);
    return d;
}

CylindricalDomain CylindricalDomain::half_space(Vec normal, double offset) {
    const double norm = normal.norm();
    if (!(norm > 0.0) || !normal.allFinite() || !std::isfinite(offset)) {
        throw ParameterError("half-space needs a nonzero finite normal");
    }
    CylindricalDomain d;
    d.kind_ = Kind::half_space;
    d.dim_ = static_cast<int>(normal.size());
    d.normal_ = normal / norm;
    d.offset_ = offset / norm;
    return d;
}

CylindricalDomain CylindricalDomain::full_space(int dim) {
    if (dim < 1) throw ParameterError("full space needs dim >= 1");
    CylindricalDomain d;
    d.kind_ = Kind::full_space;
    d.dim_ = dim;
    return d;
}

bool CylindricalDomain::bounded() const {
    return kind_ == Kind::interval || kind_ == Kind::ball || kind_ == Kind::box;
}

double CylindricalDomain::sup_q_norm() const {
    switch (kind_) {
        case Kind::interval:
            return std::max(std::abs(left_), std::abs(right_));
        case Kind::ball:
            return center_.norm() + radius_;
        case Kind::box: {
            double s = 0.0;
            for (int i = 0; i < dim_; ++i) {
                const double m = std::max(std::abs(lo_[i]), std::abs(hi_[i]));
                s += m * m;
            }
            return std::sqrt(s);
        }
        default:
            throw ParameterError("sup |q| is undefined on an unbounded domain");
    }
}

double CylindricalDomain::signed_distance(const Vec& q) const {
    if (q.size() != dim_) throw ParameterError("dimension mismatch in signed_distance");
    switch (kind_) {
        case Kind::interval:
            return std::min(q[0] - left_, right_ - q[0]);
        case Kind::ball:
            return radius_ - (q - center_).norm();
        case Kind::box: {
            double inside = std::numeric_limits<double>::infinity();
            double out_sq = 0.0;
            for (int i = 0; i < dim_; ++i) {
                inside = std::min(inside, std::min(q[i] - lo_[i], hi_[i] - q[i]));
                const double over = std::max({lo_[i] - q[i], q[i] - hi_[i], 0.0});
                out_sq += over * over;
            }
            // Outside, the nearest boundary point is the coordinate clamp.
            return out_sq > 0.0 ? -std::sqrt(out_sq) : inside;
        }
        case Kind::half_space:
            return offset_ - normal_.dot(q);
        case Kind::full_space:
            return std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

Vec CylindricalDomain::outward_normal(const Vec& q) const {
    if (q.size() != dim_) throw ParameterError("dimension mismatch in outward_normal");
    Vec n = Vec::Zero(dim_);
    switch (kind_) {
        case Kind::interval:
            n[0] = (q[0] - left_ <= right_ - q[0]) ? -1.0 : 1.0;
            return n;
        case Kind::ball: {
            const Vec r = q - center_;
            const double len = r.norm();
            if (len == 0.0) {
                n[0] = 1.0;  // center is equidistant; fixed deterministic pick
                return n;
            }
            return r / len;
        }
        case Kind::box: {
            bool outside = false;
            for (int i = 0; i < dim_; ++i) {
                if (q[i] < lo_[i] || q[i] > hi_[i]) outside = true;
            }
            if (outside) {
                Vec offset = Vec::Zero(dim_);
                for (int i = 0; i < dim_; ++i) {
                    offset[i] = std::max(q[i] - hi_[i], 0.0) - std::max(lo_[i] - q[i], 0.0);
                }
                const double len = offset.norm();
                if (len > 0.0) return offset / len;
            }
            // Inside or on an edge: most-violated (nearest) face normal.
            int best = 0;
            double best_clear = std::numeric_limits<double>::infinity();
            double sign = 1.0;
            for (int i = 0; i < dim_; ++i) {
                if (q[i] - lo_[i] < best_clear) {
                    best_clear = q[i] - lo_[i];
                    best = i;
                    sign = -1.0;
                }
                if (hi_[i] - q[i] < best_clear) {
                    best_clear = hi_[i] - q[i];
                    best = i;
                    sign = 1.0;
                }
            }
            n[best] = sign;
            return n;
        }
        case Kind::half_space:
            return normal_;
        case Kind::full_space:
            throw DomainError("full space has no boundary");
    }
    return n;
}

Vec CylindricalDomain::project_to_boundary(const Vec& q) const {
    if (q.size() != dim_) throw ParameterError("dimension mismatch in project_to_boundary");
    switch (kind_) {
        case Kind::interval: {
            Vec r(1);
            r[0] = (q[0] - left_ <= right_ - q[0]) ? left_ : right_;
            return r;
        }
        case Kind::ball: {
            const Vec r = q - center_;
            const double len = r.norm();
            if (len == 0.0) {
                Vec e = Vec::Zero(dim_);
                e[0] = radius_;
                return center_ + e;
            }
            return center_ + (radius_ / len) * r;
        }
        case Kind::box: {
            Vec clamped = q.cwiseMax(lo_).cwiseMin(hi_);
            if ((clamped - q).norm() > 0.0) return clamped;
            // Inside: move to the nearest face.
            int best = 0;
            double best_clear = std::numeric_limits<double>::infinity();
            double target = 0.0;
            for (int i = 0; i < dim_; ++i) {
                if (q[i] - lo_[i] < best_clear) {
                    best_clear = q[i] - lo_[i];
                    best = i;
                    target = lo_[i];
                }
                if (hi_[i] - q[i] < best_clear) {
                    best_clear = hi_[i] - q[i];
                    best = i;
                    target = hi_[i];
                }
            }
            clamped[best] = target;
            return clamped;
        }
        case Kind::half_space:
            return q + (offset_ - normal_.dot(q)) * normal_;
        case Kind::full_space:
            throw DomainError("full space has no boundary");
    }
    return q;
}

std::string CylindricalDomain::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::interval:
            os << "interval(" << left_ << ", " << right_ << ")";
            break;
        case Kind::ball:
            os << "ball(r=" << radius_ << ", d=" << dim_ << ")";
            break;
        case Kind::box:
            os << "box(d=" << dim_ << ")";
            break;
        case Kind::half_space:
            os << "half-space(d=" << dim_ << ")";
            break;
        case Kind::full_space:
            os << "full-space(d=" << dim_ << ")";
            break;
    }
    return os.str();
}

CompactSet CompactSet::exhaustion_member(std::shared_ptr<const CylindricalDomain> domain,
                                         double k) {
    if (!domain) throw ParameterError("exhaustion member needs a domain");
    if (!(k > 0.0)) throw ParameterError("exhaustion index k must be > 0");
    CompactSet s;
    s.dim_ = domain->dim();
    s.domain_ = std::move(domain);
    s.k_ = k;
    s.q_lo_ = Vec::Constant(s.dim_, -k);
    s.q_hi_ = Vec::Constant(s.dim_, k);
    s.p_lo_ = Vec::Constant(s.dim_, -k);
    s.p_hi_ = Vec::Constant(s.dim_, k);
    return s;
}

CompactSet CompactSet::phase_box(Vec q_lo, Vec q_hi, Vec p_lo, Vec p_hi) {
    const auto n = q_lo.size();
    if (q_hi.size() != n || p_lo.size() != n || p_hi.size() != n || n < 1 ||
        !((q_hi - q_lo).minCoeff() > 0.0) || !((p_hi - p_lo).minCoeff() > 0.0)) {
        throw ParameterError("phase box needs matching lo < hi bounds");
    }
    CompactSet s;
    s.dim_ = static_cast<int>(n);
    s.q_lo_ = std::move(q_lo);
    s.q_hi_ = std::move(q_hi);
    s.p_lo_ = std::move(p_lo);
    s.p_hi_ = std::move(p_hi);
    return s;
}

bool CompactSet::contains(const Vec& q, const Vec& p) const {
    if (domain_) {
        return q.norm() <= k_ && domain_->signed_distance(q) >= 1.0 / k_ &&
               p.norm() <= k_;
    }
    for (int i = 0; i < dim_; ++i) {
        if (q[i] < q_lo_[i] || q[i] > q_hi_[i]) return false;
        if (p[i] < p_lo_[i] || p[i] > p_hi_[i]) return false;
    }
    return true;
}

void CompactSet::bounding_box(Vec& q_lo, Vec& q_hi, Vec& p_lo, Vec& p_hi) const {
    q_lo = q_lo_;
    q_hi = q_hi_;
    p_lo = p_lo_;
    p_hi = p_hi_;
}

std::vector<KineticState> CompactSet::grid(int n_per_axis) const {
    if (n_per_axis < 1) throw ParameterError("grid needs n_per_axis >= 1");
    const int axes = 2 * dim_;
    std::vector<double> coord(axes);
    std::vector<int> idx(axes, 0);
    std::vector<KineticState> out;
    while (true) {
        Vec q(dim_), p(dim_);
        for (int a = 0; a < axes; ++a) {
            const bool momentum = a >= dim_;
            const int i = momentum ? a - dim_ : a;
            const double lo = momentum ? p_lo_[i] : q_lo_[i];
            const double hi = momentum ? p_hi_[i] : q_hi_[i];
            const double frac =
                n_per_axis == 1 ? 0.5 : static_cast<double>(idx[a]) / (n_per_axis - 1);
            (momentum ? p : q)[i] = lo + frac * (hi - lo);
        }
        if (contains(q, p)) out.push_back(KineticState{q, p, 0.0});
        int a = 0;
        for (; a < axes; ++a) {
            if (++idx[a] < n_per_axis) break;
            idx[a] = 0;
        }
        if (a == axes) break;
    }
    return out;
}

}  // namespace kqsd
