#pragma once

// Reference implementations used only as test oracles. They follow textbook
// definitions directly and share no code with the library.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace agb::testing {

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Sample L-moments l1..l4 by enumerating every size-r subset of the ordered
// sample: l_r = (1/r) C(n,r)^-1 sum over subsets of
// sum_k (-1)^k C(r-1,k) x_(r-k) within the subset.
inline std::array<double, 4> lmoments_bruteforce(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const int n = static_cast<int>(x.size());
    std::array<double, 4> out{};
    for (int r = 1; r <= 4 && r <= n; ++r) {
        double total = 0.0;
        std::vector<int> idx(static_cast<std::size_t>(r));
        std::function<void(int, int)> walk = [&](int pos, int start) {
            if (pos == r) {
                double s = 0.0;
                for (int k = 0; k < r; ++k) {
                    s += ((k % 2) ? -1.0 : 1.0) * binomial(r - 1, k) * x[static_cast<std::size_t>(idx[static_cast<std::size_t>(r - 1 - k)])];
                }
                total += s;
                return;
            }
            for (int i = start; i < n; ++i) {
                idx[static_cast<std::size_t>(pos)] = i;
                walk(pos + 1, i + 1);
            }
        };
        walk(0, 0);
        out[static_cast<std::size_t>(r - 1)] = total / (r * binomial(n, r));
    }
    return out;
}

struct QpSvr {
    std::vector<double> beta;
    double bias = 0.0;
};

// Epsilon-SVR dual as a dense convex QP over x = [a; a*]:
//   min 1/2 x'Hx + c'x  s.t.  sum(a) - sum(a*) = 0,  0 <= x <= C
// solved by a primal-dual interior-point method on the full KKT system.
inline QpSvr solve_svr_qp(const Eigen::MatrixXd& k, const Eigen::VectorXd& z, double cost, double eps) {
    const Eigen::Index n = z.size(), m = 2 * n;
    Eigen::MatrixXd h(m, m);
    h << k, -k, -k, k;
    Eigen::VectorXd c(m);
    c << (eps - z.array()).matrix(), (eps + z.array()).matrix();
    Eigen::VectorXd a(m);
    a << Eigen::VectorXd::Ones(n), -Eigen::VectorXd::Ones(n);

    Eigen::VectorXd x = Eigen::VectorXd::Constant(m, cost / 2.0);
    Eigen::VectorXd s = Eigen::VectorXd::Ones(m), w = Eigen::VectorXd::Ones(m);
    double y = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        const Eigen::VectorXd u = (cost - x.array()).matrix();
        const double gap = (x.dot(s) + u.dot(w)) / static_cast<double>(2 * m);
        const Eigen::VectorXd rd = h * x + c - a * y - s + w;
        const double rp = a.dot(x);
        if (gap < 1e-15 && rd.lpNorm<Eigen::Infinity>() < 1e-13 && std::abs(rp) < 1e-13) break;
        const double mu = 0.1 * gap;

        // Eliminate s and w: D = S/X + W/U.
        Eigen::VectorXd d = (s.array() / x.array() + w.array() / u.array()).matrix();
        Eigen::VectorXd rhs = -rd + (mu / x.array() - s.array()).matrix() - (mu / u.array() - w.array()).matrix();
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
        kkt.topLeftCorner(m, m) = h;
        kkt.topLeftCorner(m, m).diagonal() += d;
        kkt.block(0, m, m, 1) = -a;
        kkt.block(m, 0, 1, m) = a.transpose();
        Eigen::VectorXd full(m + 1);
        full << rhs, -rp;
        const Eigen::VectorXd step = kkt.fullPivLu().solve(full);
        const Eigen::VectorXd dx = step.head(m);
        const double dy = step(m);
        const Eigen::VectorXd ds = (mu / x.array() - s.array() - s.array() * dx.array() / x.array()).matrix();
        const Eigen::VectorXd dw = (mu / u.array() - w.array() + w.array() * dx.array() / u.array()).matrix();

        double alpha = 1.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (dx(i) < 0) alpha = std::min(alpha, -0.99 * x(i) / dx(i));
            if (dx(i) > 0) alpha = std::min(alpha, 0.99 * u(i) / dx(i));
            if (ds(i) < 0) alpha = std::min(alpha, -0.99 * s(i) / ds(i));
            if (dw(i) < 0) alpha = std::min(alpha, -0.99 * w(i) / dw(i));
        }
        x += alpha * dx;
        y += alpha * dy;
        s += alpha * ds;
        w += alpha * dw;
    }
    QpSvr out;
    for (Eigen::Index i = 0; i < n; ++i) out.beta.push_back(x(i) - x(i + n));
    // Stationarity for a free a_i reads (K beta)_i + eps - z_i - y = 0, so the
    // decision function K beta + b has b = -y.
    out.bias = -y;
    return out;
}

}  // namespace agb::testing
