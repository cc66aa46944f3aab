#include "ivv/propensity.hpp"

#include <algorithm>
#include <cmath>

namespace ivv {

Link parse_link(const std::string& s) {
    if (s == "probit") return Link::probit;
    throw std::invalid_argument("unknown link '" + s + "' (supported: probit)");
}

Mat build_design(const Dataset& ds, const PropensityDesign& design, std::vector<std::string>* names) {
    const auto n = static_cast<Eigen::Index>(ds.n());
    const int K = ds.levels();
    const Eigen::Index k = ds.k();
    std::vector<Vec> cols;
    std::vector<std::string> nm;
    cols.push_back(Vec::Ones(n));
    nm.push_back("(intercept)");
    auto dummy = [&](int level) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = ds.z[i] == level ? 1.0 : 0.0;
        return v;
    };
    if (design.instrument_dummies)
        for (int l = 1; l < K; ++l) {
            cols.push_back(dummy(l));
            nm.push_back("z=" + std::to_string(ds.z_codes[l]));
        }
    if (design.covariates)
        for (Eigen::Index j = 0; j < k; ++j) {
            cols.push_back(ds.x.col(j));
            nm.push_back(ds.x_names[j]);
        }
    if (design.interactions)
        for (int l = 1; l < K; ++l) {
            const Vec dz = dummy(l);
            for (Eigen::Index j = 0; j < k; ++j) {
                cols.push_back(dz.cwiseProduct(ds.x.col(j)));
                nm.push_back("z=" + std::to_string(ds.z_codes[l]) + ":" + ds.x_names[j]);
            }
        }
    Mat X(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) X.col(static_cast<Eigen::Index>(c)) = cols[c];
    if (names) *names = std::move(nm);
    return X;
}

namespace {

// Per-observation score factor s_i (d ll_i / d eta) and curvature h_i (-d^2 ll_i / d eta^2).
void probit_terms(double eta, int d, double& s, double& h) {
    if (d == 1) {
        const double m = mills_ratio(eta);
        s = m;
        h = m * (m + eta);
    } else {
        const double m = mills_ratio(-eta);
        s = -m;
        h = m * (m - eta);
    }
}

struct NewtonResult {
    Vec beta;
    bool converged = false;
    int iterations = 0;
    double loglik = 0.0;
};

NewtonResult newton(const Mat& X, const std::vector<int>& d, const Vec& w, double ridge, int max_iter) {
    const Eigen::Index m = X.cols();
    NewtonResult r;
    r.beta = Vec::Zero(m);
    const double dbar = std::clamp(weighted_mean(Eigen::Map<const Eigen::VectorXi>(d.data(), d.size()).cast<double>(), w),
                                   0.01, 0.99);
    r.beta[0] = norm_quantile(dbar);
    double ll = probit_loglik(X, d, w, r.beta, ridge);
    const double scale = std::max(1.0, w.sum());
    for (int it = 1; it <= max_iter; ++it) {
        r.iterations = it;
        const Vec eta = X * r.beta;
        Vec g = Vec::Zero(m);
        Mat info = Mat::Zero(m, m);
        Vec sv(eta.size()), hv(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) probit_terms(eta[i], d[i], sv[i], hv[i]);
        g = X.transpose() * sv.cwiseProduct(w);
        info = X.transpose() * (hv.cwiseProduct(w)).asDiagonal() * X;
        if (ridge > 0.0)
            for (Eigen::Index j = 1; j < m; ++j) {
                g[j] -= ridge * r.beta[j];
                info(j, j) += ridge;
            }
        if (g.cwiseAbs().maxCoeff() < 1e-10 * scale) {
            r.converged = true;
            break;
        }
        Eigen::LDLT<Mat> ldlt(info);
        if (ldlt.info() != Eigen::Success) break;
        const Vec step = ldlt.solve(g);
        double t = 1.0;
        Vec cand;
        double cand_ll = -INFINITY;
        for (int h = 0; h < 40; ++h) {
            cand = r.beta + t * step;
            cand_ll = probit_loglik(X, d, w, cand, ridge);
            if (cand_ll >= ll) break;
            t *= 0.5;
        }
        if (!(cand_ll >= ll)) {
            // no ascent possible along the Newton direction: at the optimum up to rounding
            r.converged = g.cwiseAbs().maxCoeff() < 1e-6 * scale;
            break;
        }
        const double change = (t * step).cwiseAbs().maxCoeff();
        r.beta = cand;
        ll = cand_ll;
        if (change < 1e-13 * (1.0 + r.beta.cwiseAbs().maxCoeff())) {
            r.converged = true;
            break;
        }
    }
    r.loglik = ll;
    return r;
}

}  // namespace

double probit_loglik(const Mat& X, const std::vector<int>& d, const Vec& w, const Vec& beta, double ridge) {
    const Vec eta = X * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += w[i] * log_norm_cdf(d[i] ? eta[i] : -eta[i]);
    if (ridge > 0.0) ll -= 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
    return ll;
}

Vec probit_gradient(const Mat& X, const std::vector<int>& d, const Vec& w, const Vec& beta, double ridge) {
    const Vec eta = X * beta;
    Vec sv(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double h;
        probit_terms(eta[i], d[i], sv[i], h);
    }
    Vec g = X.transpose() * sv.cwiseProduct(w);
    if (ridge > 0.0) g.tail(g.size() - 1) -= ridge * beta.tail(beta.size() - 1);
    return g;
}

PropensityFit fit_probit(const Dataset& ds, const PropensityDesign& design, const ProbitOptions& opts) {
    PropensityFit fit;
    fit.design = design;
    fit.link = opts.link;
    fit.levels = ds.levels();
    fit.k = ds.k();

    std::vector<std::string> names;
    const Mat full = build_design(ds, design, &names);
    for (Eigen::Index c = 0; c < full.cols(); ++c) {
        if (c > 0 && full.col(c).maxCoeff() == full.col(c).minCoeff()) {
            fit.warnings.push_back("propensity design: constant column '" + names[c] + "' removed");
            continue;
        }
        fit.kept.push_back(static_cast<int>(c));
        fit.columns.push_back(names[c]);
    }
    Mat X(full.rows(), static_cast<Eigen::Index>(fit.kept.size()));
    for (std::size_t c = 0; c < fit.kept.size(); ++c) X.col(static_cast<Eigen::Index>(c)) = full.col(fit.kept[c]);
    if (static_cast<Eigen::Index>(ds.n()) <= X.cols())
        throw DataError("propensity design: n=" + std::to_string(ds.n()) + " does not exceed the " +
                        std::to_string(X.cols()) + " design columns");
    Eigen::ColPivHouseholderQR<Mat> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) throw DataError("propensity design is rank deficient after pruning");

    NewtonResult r = newton(X, ds.d, ds.w, 0.0, opts.max_iter);
    const double max_index = (X * r.beta).cwiseAbs().maxCoeff();
    if (!r.converged || max_index > opts.index_cap) {
        fit.warnings.push_back(std::string("probit: ") +
                               (r.converged ? "quasi-separation (|index| > " + fmt_double(opts.index_cap) + ")"
                                            : "no convergence in " + std::to_string(opts.max_iter) + " iterations") +
                               "; refit with ridge penalty " + fmt_double(opts.ridge));
        r = newton(X, ds.d, ds.w, opts.ridge, opts.max_iter);
        fit.ridge_used = opts.ridge;
        if (!r.converged) fit.warnings.push_back("probit: penalized fit did not converge either");
    }
    fit.coef = r.beta;
    fit.converged = r.converged;
    fit.iterations = r.iterations;
    fit.loglik = r.loglik;

    const Vec eta = X * fit.coef;
    Vec hv(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double s;
        probit_terms(eta[i], ds.d[i], s, hv[i]);
    }
    Mat info = X.transpose() * (hv.cwiseProduct(ds.w)).asDiagonal() * X;
    if (fit.ridge_used > 0.0)
        for (Eigen::Index j = 1; j < info.cols(); ++j) info(j, j) += fit.ridge_used;
    fit.covariance = info.ldlt().solve(Mat::Identity(info.rows(), info.cols()));
    fit.fitted = predict_scores(fit, ds);
    return fit;
}

Vec predict_scores(const PropensityFit& fit, const Dataset& ds) {
    if (ds.levels() != fit.levels || ds.k() != fit.k)
        throw DataError("predict_scores: dataset shape does not match the fitted design");
    const Mat full = build_design(ds, fit.design);
    if (static_cast<Eigen::Index>(fit.kept.size()) != fit.coef.size())
        throw DataError("predict_scores: coefficient length does not match the design");
    Vec eta = Vec::Zero(full.rows());
    for (std::size_t c = 0; c < fit.kept.size(); ++c) eta += fit.coef[static_cast<Eigen::Index>(c)] * full.col(fit.kept[c]);
    Vec p(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) p[i] = std::clamp(norm_cdf(eta[i]), kScoreClamp, 1.0 - kScoreClamp);
    return p;
}

}  // namespace ivv
