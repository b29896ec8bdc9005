#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace kqsd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Point of the phase space R^d x R^d at a given time.
struct KineticState {
    Vec q;
    Vec p;
    double t = 0.0;

    int dim() const { return static_cast<int>(q.size()); }

    bool finite() const {
        return q.allFinite() && p.allFinite() && std::isfinite(t);
    }
};

inline KineticState make_state(Vec q, Vec p, double t = 0.0) {
    if (q.size() != p.size() || q.size() < 1) {
        throw std::invalid_argument("kinetic state needs matching q/p dimensions >= 1");
    }
    KineticState s{std::move(q), std::move(p), t};
    if (!s.finite() || t < 0.0) {
        throw std::invalid_argument("kinetic state must be finite with t >= 0");
    }
    return s;
}

inline KineticState make_state1(double q, double p, double t = 0.0) {
    Vec vq(1), vp(1);
    vq << q;
    vp << p;
    return make_state(std::move(vq), std::move(vp), t);
}

// Norm convention used for growth bounds: |x| = |q| + |p|.
inline double phase_norm(const Vec& q, const Vec& p) { return q.norm() + p.norm(); }

}  // namespace kqsd
