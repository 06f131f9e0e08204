#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

namespace qnpop {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Per-capita rate as a function of the density vector. The closed forms cover
// every shipped model and keep the jump-process inner loop free of indirect
// calls; Custom is the escape hatch for user-supplied callables (bindings,
// tests). Closed forms also give analytic gradients and Hessians.
class RateExpr {
  public:
    enum class Kind { Constant, Affine, MonodUptake, MonodRecip, Custom };

    RateExpr() = default;

    static RateExpr constant(double c);
    // c0 + w·x
    static RateExpr affine(double c0, Vector w);
    // num * s/(half + s) with s = s0 + sw·x
    static RateExpr monod_uptake(double num, double half, double s0, Vector sw);
    // num / (half + s) with s = s0 + sw·x
    static RateExpr monod_recip(double num, double half, double s0, Vector sw);
    static RateExpr custom(std::function<double(const Vector&)> fn);

    double operator()(const Vector& x) const {
        switch (kind_) {
            case Kind::Constant: return c0_;
            case Kind::Affine: return c0_ + w_.dot(x);
            case Kind::MonodUptake: {
                const double s = c0_ + w_.dot(x);
                return num_ * s / (half_ + s);
            }
            case Kind::MonodRecip: return num_ / (half_ + c0_ + w_.dot(x));
            case Kind::Custom: return fn_(x);
        }
        return 0.0;
    }

    Vector grad(const Vector& x) const;
    Matrix hess(const Vector& x) const;
    bool is_custom() const { return kind_ == Kind::Custom; }
    Kind kind() const { return kind_; }

    // serialization hooks (io.cpp); Custom has none
    double c0() const { return c0_; }
    const Vector& w() const { return w_; }
    double num() const { return num_; }
    double half() const { return half_; }

  private:
    Kind kind_ = Kind::Constant;
    double c0_ = 0.0;
    Vector w_;
    double num_ = 0.0;
    double half_ = 0.0;
    std::function<double(const Vector&)> fn_;
};

// Finite-N per-capita rate: limit + corr / N^power (+ optional fully custom
// (x, N) override). With no correction the finite-N rate equals the limit.
class NRate {
  public:
    NRate() = default;
    /*implicit*/ NRate(RateExpr limit) : limit_(std::move(limit)) {}
    NRate(RateExpr limit, RateExpr corr, double power)
        : limit_(std::move(limit)), corr_(std::move(corr)), power_(power), has_corr_(true) {}

    static NRate custom_n(RateExpr limit, std::function<double(const Vector&, double)> fn) {
        NRate r(std::move(limit));
        r.custom_n_ = std::move(fn);
        r.has_custom_n_ = true;
        return r;
    }

    double at(const Vector& x, double N) const {
        if (has_custom_n_) return custom_n_(x, N);
        double v = limit_(x);
        if (has_corr_) v += corr_(x) * std::pow(N, -power_);
        return v;
    }
    double limit(const Vector& x) const { return limit_(x); }
    const RateExpr& limit_expr() const { return limit_; }
    const RateExpr& corr_expr() const { return corr_; }
    double corr_power() const { return power_; }
    bool has_corr() const { return has_corr_; }
    bool has_custom_n() const { return has_custom_n_; }
    bool has_correction() const { return has_corr_ || has_custom_n_; }

  private:
    RateExpr limit_;
    RateExpr corr_;
    double power_ = 1.0;
    bool has_corr_ = false;
    std::function<double(const Vector&, double)> custom_n_;
    bool has_custom_n_ = false;
};

} // namespace qnpop
