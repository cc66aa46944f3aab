#include "ivv/plm.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

namespace ivv {

PhiMode parse_phi(const std::string& s) {
    PhiMode m;
    if (s == "nonparametric" || s == "np") return m;
    if (s.rfind("poly:", 0) == 0) {
        m.kind = PhiMode::polynomial;
        try {
            m.degree = std::stoi(s.substr(5));
        } catch (...) {
            throw std::invalid_argument("bad polynomial degree in '" + s + "'");
        }
        if (m.degree < 0) throw std::invalid_argument("polynomial degree must be nonnegative");
        return m;
    }
    throw std::invalid_argument("unknown phi mode '" + s + "' (nonparametric | poly:<k>)");
}

std::string to_string(const PhiMode& m) {
    return m.kind == PhiMode::nonparametric ? "nonparametric" : "poly:" + std::to_string(m.degree);
}

Vec pinv_wls(const Mat& A, const Vec& y, const Vec& w, double tol, double warn, int* rank,
             std::vector<double>* ratios, std::vector<std::string>* log) {
    const Vec sw = w.cwiseSqrt();
    const Mat Aw = sw.asDiagonal() * A;
    const Vec yw = sw.cwiseProduct(y);
    Eigen::JacobiSVD<Mat> svd(Aw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double smax = s.size() ? s[0] : 0.0;
    Vec coef = Vec::Zero(A.cols());
    int r = 0;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        const double ratio = smax > 0 ? s[j] / smax : 0.0;
        if (ratios) ratios->push_back(ratio);
        if (s[j] > tol * smax) {
            coef += svd.matrixV().col(j) * (svd.matrixU().col(j).dot(yw) / s[j]);
            ++r;
            if (ratio < warn && log)
                log->push_back("near-collinear direction kept (singular value ratio " + fmt_double(ratio) + ")");
        } else if (log) {
            log->push_back("dropped direction (singular value ratio " + fmt_double(ratio) + ")");
        }
    }
    if (rank) *rank = r;
    return coef;
}

PartialLinearFit fit_plm(const Dataset& ds, const Vec& pscore, const PlmOptions& opts) {
    const auto n = static_cast<Eigen::Index>(ds.n());
    const Eigen::Index k = ds.k();
    if (pscore.size() != n) throw DataError("fit_plm: propensity score length mismatch");
    PartialLinearFit fit;
    fit.phi = opts.phi;
    const Eigen::Index slopes = opts.common_slopes ? k : 2 * k;

    Mat A;
    Vec target;
    Eigen::Index offset = 0;
    if (opts.phi.kind == PhiMode::nonparametric && k == 0) {
        // Nothing to partial out: u = y.
        fit.theta0 = fit.theta1 = Vec(0);
        return fit;
    }
    if (opts.phi.kind == PhiMode::nonparametric) {
        if (n <= slopes) throw DataError("fit_plm: fewer observations than parameters");
        Mat V(n, k + 1);
        V.col(0) = ds.y;
        V.rightCols(k) = ds.x;
        std::vector<BandwidthGrid> grids{opts.bw_y};
        for (Eigen::Index j = 0; j < k; ++j) grids.push_back(opts.bw_x);
        const auto fits = fit_multi(KernelMethod::local_linear, pscore, V, ds.w, grids);
        fit.mu_y = predict(fits[0], pscore);
        fit.mu_x.resize(n, k);
        fit.bandwidths.push_back(fits[0].h);
        for (Eigen::Index j = 0; j < k; ++j) {
            fit.mu_x.col(j) = predict(fits[static_cast<std::size_t>(j + 1)], pscore);
            fit.bandwidths.push_back(fits[static_cast<std::size_t>(j + 1)].h);
        }
        const Mat xt = ds.x - fit.mu_x;
        target = ds.y - fit.mu_y;
        A.resize(n, slopes);
        if (opts.common_slopes) {
            A = xt;
        } else {
            A.leftCols(k) = pscore.asDiagonal() * xt;
            A.rightCols(k) = (1.0 - pscore.array()).matrix().asDiagonal() * xt;
        }
    } else {
        const int deg = opts.phi.degree;
        offset = deg + 1;
        if (n <= offset + slopes) throw DataError("fit_plm: fewer observations than parameters");
        A.resize(n, offset + slopes);
        for (int r = 0; r <= deg; ++r) A.col(r) = pscore.array().pow(r).matrix();
        if (opts.common_slopes) {
            A.rightCols(k) = ds.x;
        } else {
            A.middleCols(offset, k) = pscore.asDiagonal() * ds.x;
            A.rightCols(k) = (1.0 - pscore.array()).matrix().asDiagonal() * ds.x;
        }
        target = ds.y;
    }

    const Vec coef = pinv_wls(A, target, ds.w, opts.pinv_tol, opts.collinear_warn, &fit.rank, &fit.singular_ratios,
                              &fit.log);
    if (opts.phi.kind == PhiMode::polynomial) fit.poly_coeffs = coef.head(offset);
    fit.theta1 = coef.segment(offset, k);
    fit.theta0 = opts.common_slopes ? fit.theta1 : Vec(coef.segment(offset + k, k));
    const Vec e = target - A * coef;
    fit.residual_variance = e.array().square().matrix().dot(ds.w) / ds.w.sum();
    if (!fit.theta0.allFinite() || !fit.theta1.allFinite())
        throw NumericalError("fit_plm: non-finite coefficients");
    return fit;
}

RelevanceTest instrument_relevance(const PropensityFit& pfit) {
    std::vector<Eigen::Index> cols;
    for (std::size_t c = 0; c < pfit.columns.size(); ++c)
        if (pfit.columns[c].rfind("z=", 0) == 0) cols.push_back(static_cast<Eigen::Index>(c));
    RelevanceTest t;
    t.df = static_cast<int>(cols.size());
    if (cols.empty() || pfit.covariance.rows() != pfit.coef.size()) return t;
    const auto m = static_cast<Eigen::Index>(cols.size());
    Vec b(m);
    Mat V(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        b[i] = pfit.coef[cols[i]];
        for (Eigen::Index j = 0; j < m; ++j) V(i, j) = pfit.covariance(cols[i], cols[j]);
    }
    Eigen::LDLT<Mat> ldlt(V);
    if (ldlt.info() != Eigen::Success) return t;
    t.stat = b.dot(ldlt.solve(b));
    if (!std::isfinite(t.stat) || t.stat < 0.0) return t;
    t.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(t.df), t.stat));
    return t;
}

PartialLinearFit fit_plm(const Dataset& ds, const PropensityFit& pfit, const PlmOptions& opts) {
    PartialLinearFit fit = fit_plm(ds, pfit.fitted, opts);
    const auto rel = instrument_relevance(pfit);
    if (rel.df > 0 && rel.p_value > opts.relevance_level)
        fit.log.push_back("near-collinear design: instrument terms of the propensity model are jointly "
                          "insignificant (Wald " + fmt_double(rel.stat) + " on " + std::to_string(rel.df) +
                          " df, p = " + fmt_double(rel.p_value) + "); X - E[X|p] has no identifying variation");
    return fit;
}

ResidualSet residuals(const Dataset& ds, const Vec& pscore, const PartialLinearFit& fit) {
    ResidualSet r;
    const auto n = static_cast<Eigen::Index>(ds.n());
    r.u.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        r.u[i] = ds.y[i] - ds.x.row(i).dot(ds.d[static_cast<std::size_t>(i)] ? fit.theta1 : fit.theta0);
    r.pscore = pscore;
    r.d = ds.d;
    r.z = ds.z;
    r.w = ds.w;
    return r;
}

}  // namespace ivv
