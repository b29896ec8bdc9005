#pragma once

#include "kqsd/types.hpp"

#include <memory>
#include <string>

namespace kqsd {

// Position-space region O defining the open cylinder D = O x R^d.  Membership
// is the strict interior: boundary points count as exited.  signed_distance is
// positive inside, negative outside, and +infinity everywhere for the full
// space (which never exits).
class CylindricalDomain {
  public:
    enum class Kind { interval, ball, box, half_space, full_space };

    static CylindricalDomain interval(double left, double right);
    static CylindricalDomain ball(Vec center, double radius);
    static CylindricalDomain box(Vec lo, Vec hi);
    // Interior side {q : normal . q < offset}; the normal is normalized here.
    static CylindricalDomain half_space(Vec normal, double offset);
    static CylindricalDomain full_space(int dim);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    bool bounded() const;
    bool never_exits() const { return kind_ == Kind::full_space; }
    // sup over O of the euclidean |q|; parameter error when unbounded.
    double sup_q_norm() const;

    bool contains(const Vec& q) const { return signed_distance(q) > 0.0; }
    double signed_distance(const Vec& q) const;
    // Outward unit normal of the nearest boundary point (most-violated face on
    // box edges where the gradient is not defined).
    Vec outward_normal(const Vec& q) const;
    Vec project_to_boundary(const Vec& q) const;

    std::string describe() const;

    // Accessors used by serialization.
    double left() const { return left_; }
    double right() const { return right_; }
    const Vec& center() const { return center_; }
    double radius() const { return radius_; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    const Vec& normal() const { return normal_; }
    double offset() const { return offset_; }

  private:
    CylindricalDomain() = default;

    Kind kind_ = Kind::full_space;
    int dim_ = 1;
    double left_ = 0.0, right_ = 0.0;
    Vec center_;
    double radius_ = 0.0;
    Vec lo_, hi_;
    Vec normal_;
    double offset_ = 0.0;
};

// Compact phase-space set used by scans and killed estimates.  Either a member
// K_k of the exhaustion {|q| <= k, d_boundary(q) >= 1/k, |p| <= k} or an
// explicit product box in (q, p).
class CompactSet {
  public:
    static CompactSet exhaustion_member(std::shared_ptr<const CylindricalDomain> domain,
                                        double k);
    static CompactSet phase_box(Vec q_lo, Vec q_hi, Vec p_lo, Vec p_hi);

    bool contains(const Vec& q, const Vec& p) const;
    bool contains(const KineticState& s) const { return contains(s.q, s.p); }
    int dim() const { return dim_; }
    bool is_exhaustion_member() const { return domain_ != nullptr; }
    double k() const { return k_; }

    // Bounding product box (exhaustion members are intersected with it).
    void bounding_box(Vec& q_lo, Vec& q_hi, Vec& p_lo, Vec& p_hi) const;

    // Deterministic grid of member states, at most n_per_axis per axis.
    std::vector<KineticState> grid(int n_per_axis) const;

  private:
    CompactSet() = default;

    int dim_ = 1;
    std::shared_ptr<const CylindricalDomain> domain_;
    double k_ = 0.0;
    Vec q_lo_, q_hi_, p_lo_, p_hi_;
};

}  // namespace kqsd
