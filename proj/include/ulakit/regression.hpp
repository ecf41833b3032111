#pragma once

// Bridge-regression objective
//
//     L(beta) = sum_i (y_i - x_i^T beta)^2 + lambda * sum_j |beta_j|^gamma,
//
// with gamma in (1, 2], its gradient, and two minimizer oracles (closed-form
// ridge for gamma = 2, deterministic gradient descent otherwise).

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ulakit/error.hpp"
#include "ulakit/format.hpp"
#include "ulakit/linalg.hpp"
#include "ulakit/random.hpp"

namespace ulakit {

struct RegressionData {
    std::vector<Vector> x;  // N points of dimension d
    Vector y;               // N responses

    std::size_t size() const noexcept { return y.size(); }

    /// Dimension of the covariates; `fallback` when the set is empty.
    std::size_t dim(std::size_t fallback = 0) const noexcept { return x.empty() ? fallback : x.front().size(); }

    void check() const {
        if (x.size() != y.size()) throw DimensionError("RegressionData: x and y lengths differ");
        for (const auto& xi : x) require_dim(xi.size(), dim(), "RegressionData point");
    }
};

namespace detail {

inline void check_bridge_params(double lambda, double gamma) {
    if (!(lambda >= 0.0)) throw DomainError("bridge: lambda must be >= 0");
    if (!(gamma > 1.0 && gamma <= 2.0)) throw DomainError("bridge: gamma must lie in (1, 2]");
}

/// d/db lambda*|b|^gamma, extended by 0 at b = 0 (the limit for gamma > 1).
inline double penalty_grad(double b, double lambda, double gamma) noexcept {
    if (b == 0.0 || lambda == 0.0) return 0.0;
    const double mag = std::fabs(b);
    double pw;
    if (gamma == 2.0) {
        pw = mag;
    } else if (gamma == 1.5) {
        pw = std::sqrt(mag);
    } else {
        pw = std::pow(mag, gamma - 1.0);
    }
    return std::copysign(lambda * gamma * pw, b);
}

}  // namespace detail

inline double bridge_loss(const RegressionData& data, double lambda, double gamma, std::span<const double> beta) {
    detail::check_bridge_params(lambda, gamma);
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        require_dim(data.x[i].size(), beta.size(), "bridge_loss");
        const double r = data.y[i] - dot(data.x[i], beta);
        loss += r * r;
    }
    for (double b : beta) loss += lambda * std::pow(std::fabs(b), gamma);
    return loss;
}

/// Gradient of `bridge_loss`, accumulated point by point from the residuals.
inline Vector bridge_loss_grad(const RegressionData& data, double lambda, double gamma, std::span<const double> beta) {
    detail::check_bridge_params(lambda, gamma);
    Vector g(beta.size(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        require_dim(data.x[i].size(), beta.size(), "bridge_loss_grad");
        const double r = data.y[i] - dot(data.x[i], beta);
        for (std::size_t j = 0; j < beta.size(); ++j) g[j] -= 2.0 * data.x[i][j] * r;
    }
    for (std::size_t j = 0; j < beta.size(); ++j) g[j] += detail::penalty_grad(beta[j], lambda, gamma);
    return g;
}

/// The same objective with the data folded into X^T X and X^T y, so a
/// gradient costs O(d^2) instead of O(N d). This is what the samplers call.
class BridgeObjective {
public:
    BridgeObjective(const RegressionData& data, double lambda, double gamma, std::size_t dim)
        : dim_(dim), lambda_(lambda), gamma_(gamma), gram_(dim, dim), xty_(dim, 0.0) {
        detail::check_bridge_params(lambda, gamma);
        data.check();
        if (data.size() > 0) require_dim(data.dim(), dim, "BridgeObjective");
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& xi = data.x[i];
            for (std::size_t a = 0; a < dim; ++a) {
                xty_[a] += xi[a] * data.y[i];
                for (std::size_t b = 0; b < dim; ++b) gram_(a, b) += xi[a] * xi[b];
            }
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    double lambda() const noexcept { return lambda_; }
    double gamma() const noexcept { return gamma_; }
    const Matrix& gram() const noexcept { return gram_; }
    const Vector& xty() const noexcept { return xty_; }

    /// out = grad L(beta)
    void gradient(std::span<const double> beta, std::span<double> out) const noexcept {
        gram_.apply(beta, out);
        for (std::size_t j = 0; j < dim_; ++j) {
            out[j] = 2.0 * (out[j] - xty_[j]) + detail::penalty_grad(beta[j], lambda_, gamma_);
        }
    }

private:
    std::size_t dim_;
    double lambda_;
    double gamma_;
    Matrix gram_;
    Vector xty_;
};

/// argmin for gamma = 2: (X^T X + lambda I)^{-1} X^T y.
inline Vector ridge_closed_form(const RegressionData& data, double lambda, std::size_t dim) {
    data.check();
    Eigen::MatrixXd a = lambda * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < data.size(); ++i) {
        require_dim(data.x[i].size(), dim, "ridge_closed_form");
        const Eigen::Map<const Eigen::VectorXd> xi(data.x[i].data(), static_cast<Eigen::Index>(dim));
        a += xi * xi.transpose();
        rhs += data.y[i] * xi;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw DomainError("ridge_closed_form: X^T X + lambda I is not positive definite");
    }
    const Eigen::VectorXd sol = ldlt.solve(rhs);
    return Vector(sol.data(), sol.data() + sol.size());
}

struct MinimizerResult {
    Vector beta;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
};

/// Deterministic full-gradient descent on the bridge objective until
/// |grad L| <= tol.
///
/// The step along -g is the largest power-of-two multiple of the previous step
/// that does not pass the line minimum, i.e. <grad L(beta - s g), g> >= 0.
/// The test uses gradients only, so it keeps working when loss differences
/// fall below rounding.
inline MinimizerResult bridge_minimizer_gd(const RegressionData& data, double lambda, double gamma, Vector beta0,
                                           double tol = 1e-12, std::size_t max_iter = 1'000'000) {
    MinimizerResult res{std::move(beta0), 0.0, 0};
    double step = 1e-3;
    Vector trial(res.beta.size());
    for (; res.iterations < max_iter; ++res.iterations) {
        const Vector g = bridge_loss_grad(data, lambda, gamma, res.beta);
        res.grad_norm = norm(g);
        if (res.grad_norm <= tol) return res;
        step *= 2.0;
        for (int halvings = 0;; ++halvings) {
            for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = res.beta[j] - step * g[j];
            if (dot(bridge_loss_grad(data, lambda, gamma, trial), g) >= 0.0) break;
            if (halvings > 200) throw DomainError("bridge_minimizer_gd: line search failed");
            step *= 0.5;
        }
        res.beta = trial;
    }
    throw DomainError("bridge_minimizer_gd: gradient norm " + format_double(res.grad_norm) + " above tolerance after " +
                      std::to_string(max_iter) + " iterations");
}

/// Seeded synthetic dataset: x_i ~ N(0, I_d), y_i = x_i^T beta* + 0.3 eps_i
/// with beta*_j = (-1/2)^j.
inline RegressionData make_synthetic_regression(std::size_t n, std::size_t dim, std::uint64_t seed) {
    RandomStream rng(seed, 0, stream_purpose::kDataset);
    Vector truth(dim);
    for (std::size_t j = 0; j < dim; ++j) truth[j] = std::pow(-0.5, static_cast<double>(j));
    RegressionData data;
    for (std::size_t i = 0; i < n; ++i) {
        Vector xi(dim);
        for (auto& v : xi) v = rng.normal();
        data.y.push_back(dot(xi, truth) + 0.3 * rng.normal());
        data.x.push_back(std::move(xi));
    }
    return data;
}

/// CSV with header x_1..x_d,y.
inline void write_regression_csv(std::ostream& out, const RegressionData& data) {
    const std::size_t d = data.dim();
    for (std::size_t j = 0; j < d; ++j) out << "x_" << (j + 1) << ',';
    out << "y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.x[i]) out << format_double(v) << ',';
        out << format_double(data.y[i]) << '\n';
    }
}

namespace detail {

inline std::vector<double> parse_csv_numbers(const std::string& line, std::size_t line_no) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = line.find(',', pos);
        if (end == std::string::npos) end = line.size();
        std::size_t b = pos;
        std::size_t e = end;
        while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
        double v = 0.0;
        auto res = std::from_chars(line.data() + b, line.data() + e, v);
        if (res.ec != std::errc{} || res.ptr != line.data() + e) {
            throw ConfigError("CSV line " + std::to_string(line_no) + ": cannot parse number '" +
                              line.substr(b, e - b) + "'");
        }
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

}  // namespace detail

inline RegressionData read_regression_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("regression CSV: missing header");
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 2) throw ConfigError("regression CSV: need columns x_1..x_d,y");
    RegressionData data;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (line.back() == '\r') line.pop_back();
        auto nums = detail::parse_csv_numbers(line, line_no);
        if (nums.size() != columns) {
            throw ConfigError("regression CSV line " + std::to_string(line_no) + ": expected " +
                              std::to_string(columns) + " columns");
        }
        data.y.push_back(nums.back());
        nums.pop_back();
        data.x.push_back(std::move(nums));
    }
    return data;
}

inline RegressionData read_regression_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset '" + path + "'");
    return read_regression_csv(in);
}

}  // namespace ulakit
