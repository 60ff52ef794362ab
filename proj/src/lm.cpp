#include "esrkit/lm.hpp"

#include <algorithm>
#include <cmath>

#include "esrkit/errors.hpp"

namespace esr {

namespace {

enum class BoundKind { Free, Lower, Upper, Both };

struct Transform {
    BoundKind kind = BoundKind::Free;
    double lo = 0.0, hi = 0.0;

    // internal q -> external p
    double to_external(double q) const
    {
        switch (kind) {
            case BoundKind::Free: return q;
            case BoundKind::Lower: return lo + std::exp(q);
            case BoundKind::Upper: return hi - std::exp(q);
            case BoundKind::Both: {
                const double s = 1.0 / (1.0 + std::exp(-q));
                return lo + (hi - lo) * s;
            }
        }
        return q;
    }
    double to_internal(double p) const
    {
        switch (kind) {
            case BoundKind::Free: return p;
            case BoundKind::Lower: return std::log(p - lo);
            case BoundKind::Upper: return std::log(hi - p);
            case BoundKind::Both: {
                const double s = (p - lo) / (hi - lo);
                return std::log(s / (1.0 - s));
            }
        }
        return p;
    }
    double dp_dq(double q) const
    {
        switch (kind) {
            case BoundKind::Free: return 1.0;
            case BoundKind::Lower: return std::exp(q);
            case BoundKind::Upper: return -std::exp(q);
            case BoundKind::Both: {
                const double s = 1.0 / (1.0 + std::exp(-q));
                return (hi - lo) * s * (1.0 - s);
            }
        }
        return 1.0;
    }
};

Transform make_transform(const ParamSpec& spec)
{
    Transform t;
    const bool has_lo = std::isfinite(spec.lo);
    const bool has_hi = std::isfinite(spec.hi);
    t.lo = spec.lo;
    t.hi = spec.hi;
    if (has_lo && has_hi) {
        t.kind = BoundKind::Both;
        if (!(spec.init > spec.lo && spec.init < spec.hi))
            throw FitError("parameter '" + spec.name + "': init must lie inside (lo, hi)");
    } else if (has_lo) {
        t.kind = BoundKind::Lower;
        if (!(spec.init > spec.lo))
            throw FitError("parameter '" + spec.name + "': init must exceed the lower bound");
    } else if (has_hi) {
        t.kind = BoundKind::Upper;
        if (!(spec.init < spec.hi))
            throw FitError("parameter '" + spec.name + "': init must be below the upper bound");
    }
    return t;
}

// smooth soft-L1 residual map: 1/2 sum rt^2 equals the soft-L1 cost exactly
Eigen::VectorXd soft_l1(const Eigen::VectorXd& r, double fs)
{
    Eigen::VectorXd out(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double z = (r(i) / fs) * (r(i) / fs);
        double factor;
        if (z < 1e-8)
            factor = std::sqrt(1.0 - 0.25 * z);  // series of 2(sqrt(1+z)-1)/z
        else
            factor = std::sqrt(2.0 * (std::sqrt(1.0 + z) - 1.0) / z);
        out(i) = r(i) * factor;
    }
    return out;
}

double median_of(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lower = *std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (m + lower);
    }
    return m;
}

double mad_scale(const Eigen::VectorXd& r)
{
    std::vector<double> a(r.data(), r.data() + r.size());
    const double med = median_of(a);
    for (auto& v : a) v = std::abs(v - med);
    const double s = 1.4826 * median_of(a);
    return s > 0.0 ? s : 1.0;
}

// restart value nudged strictly inside the bounds; a previous stage can land
// a rounding step away from them, which the transforms cannot represent
ParamSpec warmed(const ParamSpec& spec, double value)
{
    ParamSpec out = spec;
    out.init = value;
    const bool has_lo = std::isfinite(spec.lo);
    const bool has_hi = std::isfinite(spec.hi);
    if (has_lo && has_hi) {
        const double margin = 1e-12 * (spec.hi - spec.lo);
        out.init = std::min(std::max(out.init, spec.lo + margin), spec.hi - margin);
    } else if (has_lo && !(out.init > spec.lo)) {
        out.init = spec.lo + std::max(1e-12, 1e-12 * std::abs(spec.lo));
    } else if (has_hi && !(out.init < spec.hi)) {
        out.init = spec.hi - std::max(1e-12, 1e-12 * std::abs(spec.hi));
    }
    return out;
}

}  // namespace

double FitResult::param(const std::string& name) const
{
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return params(static_cast<Eigen::Index>(i));
    throw FitError("no parameter named '" + name + "'");
}

double FitResult::ci(const std::string& name) const
{
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return ci95(static_cast<Eigen::Index>(i));
    throw FitError("no parameter named '" + name + "'");
}

FitResult lm_fit(const ResidualFn& residuals, const std::vector<ParamSpec>& specs,
                 const FitOptions& options)
{
    const int n = static_cast<int>(specs.size());
    if (n == 0) throw FitError("lm_fit: no parameters");

    if (options.robust && options.f_scale <= 0.0) {
        // Scale-free robust call: a plain fit locates the bulk, the MAD of
        // its residuals sets the inlier scale, and robust passes refine from
        // there.  Rescale rounds matter when outliers drag the plain fit.
        FitOptions stage = options;
        stage.robust = false;
        FitResult cur = lm_fit(residuals, specs, stage);
        stage.robust = true;
        double last = 0.0;
        for (int round = 0; round < 3; ++round) {
            const double fs = mad_scale(residuals(cur.params));
            if (round > 0 && std::abs(fs - last) <= 0.1 * last) break;
            last = fs;
            stage.f_scale = fs;
            std::vector<ParamSpec> warm = specs;
            for (size_t j = 0; j < warm.size(); ++j)
                warm[j] = warmed(warm[j], cur.params(static_cast<Eigen::Index>(j)));
            cur = lm_fit(residuals, warm, stage);
        }
        return cur;
    }

    std::vector<Transform> tf(specs.size());
    Eigen::VectorXd q(n);
    for (int j = 0; j < n; ++j) {
        if (!std::isfinite(specs[j].init))
            throw FitError("parameter '" + specs[j].name + "': init must be finite");
        tf[j] = make_transform(specs[j]);
        q(j) = tf[j].to_internal(specs[j].init);
    }

    auto external = [&](const Eigen::VectorXd& qq) {
        Eigen::VectorXd p(n);
        for (int j = 0; j < n; ++j) p(j) = tf[j].to_external(qq(j));
        return p;
    };

    const double f_scale = options.f_scale;  // > 0 whenever robust, per the intercept above
    Eigen::VectorXd r0 = residuals(external(q));
    const int m = static_cast<int>(r0.size());
    if (m < 1) throw FitError("lm_fit: empty residual vector");
    if (!r0.allFinite())
        throw FitError("lm_fit: residuals not finite at the starting point");

    auto eval = [&](const Eigen::VectorXd& qq) -> Eigen::VectorXd {
        Eigen::VectorXd r = residuals(external(qq));
        if (r.size() != m) throw FitError("lm_fit: residual length changed between calls");
        if (options.robust) r = soft_l1(r, f_scale);
        return r;
    };

    // step scale per internal coordinate, frozen at the start
    Eigen::VectorXd scale(n);
    for (int j = 0; j < n; ++j) scale(j) = std::max(std::abs(q(j)), 1.0);

    auto jacobian = [&](const Eigen::VectorXd& qq, Eigen::MatrixXd& jac) {
        for (int j = 0; j < n; ++j) {
            const double h = 1e-6 * std::max(std::abs(qq(j)), scale(j) * 1e-3);
            Eigen::VectorXd qp = qq, qm = qq;
            qp(j) += h;
            qm(j) -= h;
            jac.col(j) = (eval(qp) - eval(qm)) / (2.0 * h);
        }
    };

    Eigen::VectorXd r = eval(q);
    double cost = 0.5 * r.squaredNorm();
    Eigen::MatrixXd jac(m, n);

    double lambda = 1e-3;
    bool converged = false;
    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
        jacobian(q, jac);
        const Eigen::VectorXd grad = jac.transpose() * r;
        Eigen::MatrixXd jtj = jac.transpose() * jac;
        const double gnorm = grad.lpNorm<Eigen::Infinity>();
        if (gnorm < options.gtol * std::max(1.0, cost)) {
            converged = true;
            break;
        }
        bool stepped = false;
        for (int tries = 0; tries < 40; ++tries) {
            Eigen::MatrixXd a = jtj;
            for (int j = 0; j < n; ++j)
                a(j, j) += lambda * std::max(jtj(j, j), 1e-12);
            const Eigen::VectorXd dq = a.ldlt().solve(-grad);
            if (!dq.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd q_new = q + dq;
            const Eigen::VectorXd r_new = eval(q_new);
            const double cost_new = 0.5 * r_new.squaredNorm();
            if (cost_new < cost) {
                const double drop = (cost - cost_new) / std::max(cost, 1e-300);
                const double step = dq.norm() / std::max(q.norm(), 1.0);
                q = q_new;
                r = r_new;
                cost = cost_new;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (drop < options.ftol || step < options.xtol) converged = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
        if (!stepped) {
            // no downhill step at any damping: treat as converged-in-place
            converged = true;
            break;
        }
        if (converged) break;
    }

    FitResult out;
    out.iterations = iter;
    out.converged = converged;
    out.cost = cost;
    out.names.reserve(specs.size());
    for (const auto& s : specs) out.names.push_back(s.name);
    out.params = external(q);

    // covariance from J^T J at the optimum, mapped to external coordinates
    jacobian(q, jac);
    Eigen::MatrixXd jtj = jac.transpose() * jac;
    const double dof = std::max(1, m - n);
    const double s2 = 2.0 * cost / dof;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jtj, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues().maxCoeff();
    const double cut = std::max(smax * 1e-12, 1e-300);
    Eigen::VectorXd inv_s(n);
    for (int j = 0; j < n; ++j) {
        const double sv = svd.singularValues()(j);
        if (sv > cut) {
            inv_s(j) = 1.0 / sv;
        } else {
            inv_s(j) = 1.0 / cut;  // flat direction: report huge, not infinite
        }
    }
    Eigen::MatrixXd cov_q =
        svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose() * s2;
    Eigen::VectorXd dpdq(n);
    for (int j = 0; j < n; ++j) dpdq(j) = tf[j].dp_dq(q(j));
    out.covariance = dpdq.asDiagonal() * cov_q * dpdq.asDiagonal();
    out.ci95 = (1.96 * out.covariance.diagonal().array().sqrt()).matrix();

    // flag parameters the data cannot see (flat Jacobian columns)
    double max_col = 0.0;
    for (int j = 0; j < n; ++j) max_col = std::max(max_col, jac.col(j).norm());
    for (int j = 0; j < n; ++j) {
        if (jac.col(j).norm() <= 1e-10 * std::max(max_col, 1e-300))
            out.notes.push_back("parameter '" + specs[j].name +
                                "' is unconstrained by the data");
    }
    return out;
}

}  // namespace esr
