#include "istar/ista_solver.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>

#include "istar/errors.hpp"

namespace istar::ista {

void IstaProblem::validate() const {
    if (D.rows() == 0 || D.cols() == 0) throw InputError("ISTA problem: D must be non-empty");
    if (y.size() != D.rows())
        throw InputError("ISTA problem: y has length " + std::to_string(y.size()) + " but D has " +
                         std::to_string(D.rows()) + " rows");
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw InputError("ISTA problem: lambda must be finite and >= 0");
    if (!D.allFinite() || !y.allFinite()) throw InputError("ISTA problem: non-finite entries");
}

namespace {

void require_cols(const IstaProblem& p, const Eigen::VectorXd& x) {
    if (x.size() != p.D.cols())
        throw InputError("ISTA: x has length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(p.D.cols()));
}

void require_alpha(double alpha) {
    if (!(alpha > 0) || !std::isfinite(alpha)) throw InputError("ISTA: step size must be positive");
}

} // namespace

double objective(const IstaProblem& problem, const Eigen::VectorXd& x) {
    require_cols(problem, x);
    return 0.5 * (problem.D * x - problem.y).squaredNorm() + problem.lambda * x.lpNorm<1>();
}

Eigen::VectorXd shrink(const Eigen::VectorXd& v, double threshold) {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = v[i];
        out[i] = a > threshold ? a - threshold : (a < -threshold ? a + threshold : 0.0);
    }
    return out;
}

Eigen::VectorXd ista_step(const IstaProblem& problem, const Eigen::VectorXd& x, double alpha) {
    require_cols(problem, x);
    require_alpha(alpha);
    // Same association as ista_step_precomputed, so hoisting D^T y is exact.
    const Eigen::VectorXd dty = problem.D.transpose() * problem.y;
    const Eigen::VectorXd grad = problem.D.transpose() * (problem.D * x) - dty;
    return shrink(x - alpha * grad, problem.lambda * alpha);
}

Eigen::VectorXd ista_step_affine(const IstaProblem& problem, const Eigen::VectorXd& x, double alpha) {
    require_cols(problem, x);
    require_alpha(alpha);
    const auto n = problem.D.cols();
    const Eigen::MatrixXd transition = Eigen::MatrixXd::Identity(n, n) - alpha * problem.D.transpose() * problem.D;
    return shrink(transition * x + alpha * (problem.D.transpose() * problem.y), problem.lambda * alpha);
}

Eigen::VectorXd ista_step_precomputed(const IstaProblem& problem, const Eigen::VectorXd& x, double alpha,
                                      const Eigen::VectorXd& dty) {
    const Eigen::VectorXd grad = problem.D.transpose() * (problem.D * x) - dty;
    return shrink(x - alpha * grad, problem.lambda * alpha);
}

double lipschitz_constant(const Eigen::MatrixXd& D, std::size_t iterations) {
    // Deterministic start that is not orthogonal to any eigenvector in general position.
    Eigen::VectorXd v(D.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
    v.normalize();
    for (std::size_t k = 0; k < iterations; ++k) {
        Eigen::VectorXd w = D.transpose() * (D * v);
        const double norm = w.norm();
        if (norm == 0) return 0;
        v = w / norm;
    }
    return (D * v).squaredNorm();
}

IstaResult solve(const IstaProblem& problem, const IstaSolverConfig& config) {
    problem.validate();
    if (config.max_iters < 1) throw InputError("ISTA: max_iters must be >= 1");
    if (!(config.tol >= 0)) throw InputError("ISTA: tol must be >= 0");

    double alpha = config.alpha;
    if (alpha <= 0) {
        const double L = lipschitz_constant(problem.D);
        if (!(L > 0)) throw InputError("ISTA: D is zero, step size undefined");
        alpha = 0.99 / L;
    }
    require_alpha(alpha);

    const Eigen::VectorXd dty = problem.D.transpose() * problem.y;

    IstaTrace trace;
    trace.alpha = alpha;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.D.cols());
    auto record = [&](const Eigen::VectorXd& v) {
        trace.iterates.push_back(v);
        trace.objectives.push_back(objective(problem, v));
        trace.residuals.push_back((problem.D * v - problem.y).norm());
    };
    record(x);

    for (std::size_t k = 0; k < config.max_iters; ++k) {
        Eigen::VectorXd next = ista_step_precomputed(problem, x, alpha, dty);
        if (next == x) {
            trace.converged = true;
            break;
        }
        x = std::move(next);
        record(x);
        ++trace.iterations;
        const double prev = trace.objectives[trace.objectives.size() - 2];
        const double cur = trace.objectives.back();
        const double denom = std::max(std::abs(prev), std::numeric_limits<double>::min());
        if (std::abs(prev - cur) / denom < config.tol) {
            trace.converged = true;
            break;
        }
    }
    return {x, std::move(trace)};
}

bool check_fixed_point(const IstaProblem& problem, const Eigen::VectorXd& x, double alpha) {
    return (ista_step(problem, x, alpha) - x).lpNorm<Eigen::Infinity>() < 1e-8;
}

IstaProblem read_problem(std::istream& in) {
    long m = 0, n = 0;
    if (!(in >> m >> n) || m <= 0 || n <= 0) throw InputError("problem file: expected positive 'm n' header");
    IstaProblem p;
    p.D.resize(m, n);
    p.y.resize(m);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < n; ++j)
            if (!(in >> p.D(i, j))) throw InputError("problem file: truncated matrix D");
    for (long i = 0; i < m; ++i)
        if (!(in >> p.y[i])) throw InputError("problem file: truncated observation y");
    if (!(in >> p.lambda)) throw InputError("problem file: missing lambda");
    std::string extra;
    if (in >> extra) throw InputError("problem file: trailing content '" + extra + "'");
    p.validate();
    return p;
}

IstaProblem read_problem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open problem file '" + path + "'");
    return read_problem(in);
}

void write_trace_csv(const IstaTrace& trace, std::ostream& out) {
    out << "iter,objective,residual\n" << std::setprecision(17);
    for (std::size_t i = 0; i < trace.objectives.size(); ++i)
        out << i << ',' << trace.objectives[i] << ',' << trace.residuals[i] << '\n';
}

} // namespace istar::ista
