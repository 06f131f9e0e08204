#include "qnpop/rates.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qnpop {

RateExpr RateExpr::constant(double c) {
    RateExpr r;
    r.kind_ = Kind::Constant;
    r.c0_ = c;
    return r;
}

RateExpr RateExpr::affine(double c0, Vector w) {
    RateExpr r;
    r.kind_ = Kind::Affine;
    r.c0_ = c0;
    r.w_ = std::move(w);
    return r;
}

RateExpr RateExpr::monod_uptake(double num, double half, double s0, Vector sw) {
    RateExpr r;
    r.kind_ = Kind::MonodUptake;
    r.num_ = num;
    r.half_ = half;
    r.c0_ = s0;
    r.w_ = std::move(sw);
    return r;
}

RateExpr RateExpr::monod_recip(double num, double half, double s0, Vector sw) {
    RateExpr r;
    r.kind_ = Kind::MonodRecip;
    r.num_ = num;
    r.half_ = half;
    r.c0_ = s0;
    r.w_ = std::move(sw);
    return r;
}

RateExpr RateExpr::custom(std::function<double(const Vector&)> fn) {
    RateExpr r;
    r.kind_ = Kind::Custom;
    r.fn_ = std::move(fn);
    return r;
}

Vector RateExpr::grad(const Vector& x) const {
    const auto k = static_cast<Eigen::Index>(x.size());
    switch (kind_) {
        case Kind::Constant: return Vector::Zero(k);
        case Kind::Affine: return w_;
        case Kind::MonodUptake: {
            const double s = c0_ + w_.dot(x);
            const double d = half_ + s;
            return (num_ * half_ / (d * d)) * w_;
        }
        case Kind::MonodRecip: {
            const double d = half_ + c0_ + w_.dot(x);
            return (-num_ / (d * d)) * w_;
        }
        case Kind::Custom: {
            // central differences
            const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
            Vector g(k);
            Vector xp = x, xm = x;
            for (Eigen::Index i = 0; i < k; ++i) {
                const double h = h0 * std::max(1.0, std::abs(x[i]));
                xp[i] = x[i] + h;
                xm[i] = x[i] - h;
                g[i] = (fn_(xp) - fn_(xm)) / (2.0 * h);
                xp[i] = x[i];
                xm[i] = x[i];
            }
            return g;
        }
    }
    return Vector::Zero(k);
}

Matrix RateExpr::hess(const Vector& x) const {
    const auto k = static_cast<Eigen::Index>(x.size());
    switch (kind_) {
        case Kind::Constant:
        case Kind::Affine: return Matrix::Zero(k, k);
        case Kind::MonodUptake: {
            const double s = c0_ + w_.dot(x);
            const double d = half_ + s;
            return (-2.0 * num_ * half_ / (d * d * d)) * (w_ * w_.transpose());
        }
        case Kind::MonodRecip: {
            const double d = half_ + c0_ + w_.dot(x);
            return (2.0 * num_ / (d * d * d)) * (w_ * w_.transpose());
        }
        case Kind::Custom: {
            // central differences of the FD gradient
            const double h0 = 1e-5;
            Matrix h_mat(k, k);
            Vector xp = x, xm = x;
            for (Eigen::Index i = 0; i < k; ++i) {
                const double h = h0 * std::max(1.0, std::abs(x[i]));
                xp[i] = x[i] + h;
                xm[i] = x[i] - h;
                h_mat.col(i) = (grad(xp) - grad(xm)) / (2.0 * h);
                xp[i] = x[i];
                xm[i] = x[i];
            }
            return 0.5 * (h_mat + h_mat.transpose());
        }
    }
    return Matrix::Zero(k, k);
}

} // namespace qnpop
