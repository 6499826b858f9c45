#pragma once
// Quasi-Newton (BFGS) minimizer with central-difference gradients, for the
// handful-of-parameters likelihood fits. Objectives should be scaled O(1)
// (e.g. mean negative log-likelihood) so the gradient tolerance is meaningful.

#include <cmath>
#include <functional>
#include <vector>

namespace hfpanel {

struct OptimResult {
    std::vector<double> x;
    double f = 0.0;
    double grad_inf_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

inline std::vector<double> numeric_gradient(const Objective& fn, const std::vector<double>& x,
                                            double h0 = 1e-6) {
    const size_t n = x.size();
    std::vector<double> g(n), xp = x;
    for (size_t i = 0; i < n; ++i) {
        double h = h0 * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        double fp = fn(xp);
        xp[i] = x[i] - h;
        double fm = fn(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline OptimResult bfgs_minimize(const Objective& fn, std::vector<double> x0,
                                 int max_iters = 500, double grad_tol = 1e-6) {
    const size_t n = x0.size();
    OptimResult out;
    out.x = std::move(x0);
    out.f = fn(out.x);

    // Inverse-Hessian approximation, started at identity.
    std::vector<double> H(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;

    std::vector<double> g = numeric_gradient(fn, out.x);
    auto inf_norm = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double y : v) m = std::max(m, std::abs(y));
        return m;
    };

    for (out.iterations = 0; out.iterations < max_iters; ++out.iterations) {
        out.grad_inf_norm = inf_norm(g);
        if (out.grad_inf_norm < grad_tol) {
            out.converged = true;
            return out;
        }

        // Search direction d = -H g.
        std::vector<double> d(n, 0.0);
        for (size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (size_t j = 0; j < n; ++j) s += H[i * n + j] * g[j];
            d[i] = -s;
        }
        double dg = 0.0;
        for (size_t i = 0; i < n; ++i) dg += d[i] * g[i];
        if (!(dg < 0.0)) {
            // Not a descent direction (stale curvature); reset to steepest descent.
            for (size_t i = 0; i < n; ++i) {
                for (size_t j = 0; j < n; ++j) H[i * n + j] = i == j ? 1.0 : 0.0;
                d[i] = -g[i];
            }
            dg = 0.0;
            for (size_t i = 0; i < n; ++i) dg += d[i] * g[i];
            if (!(dg < 0.0)) break;  // zero gradient to machine precision
        }

        // Backtracking Armijo line search.
        double step = 1.0;
        const double c1 = 1e-4;
        std::vector<double> xn(n);
        double fn_new = out.f;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (size_t i = 0; i < n; ++i) xn[i] = out.x[i] + step * d[i];
            fn_new = fn(xn);
            if (std::isfinite(fn_new) && fn_new <= out.f + c1 * step * dg) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;  // cannot improve along d; report non-convergence unless grad small

        std::vector<double> gn = numeric_gradient(fn, xn);
        std::vector<double> s(n), yv(n);
        for (size_t i = 0; i < n; ++i) {
            s[i] = xn[i] - out.x[i];
            yv[i] = gn[i] - g[i];
        }
        double sy = 0.0, ss = 0.0, yy = 0.0;
        for (size_t i = 0; i < n; ++i) {
            sy += s[i] * yv[i];
            ss += s[i] * s[i];
            yy += yv[i] * yv[i];
        }
        out.x = xn;
        out.f = fn_new;
        g = gn;

        // BFGS inverse update, skipped when curvature is unusable.
        if (sy > 1e-12 * std::sqrt(ss * yy)) {
            std::vector<double> Hy(n, 0.0);
            for (size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (size_t j = 0; j < n; ++j) acc += H[i * n + j] * yv[j];
                Hy[i] = acc;
            }
            double yHy = 0.0;
            for (size_t i = 0; i < n; ++i) yHy += yv[i] * Hy[i];
            double rho = 1.0 / sy;
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < n; ++j) {
                    double t = (1.0 + rho * yHy) * rho * s[i] * s[j] -
                               rho * (s[i] * Hy[j] + Hy[i] * s[j]);
                    H[i * n + j] += t;
                }
        }
    }
    out.grad_inf_norm = inf_norm(g);
    out.converged = out.grad_inf_norm < grad_tol;
    return out;
}

}  // namespace hfpanel
