#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace istar::ista {

/// min_x 0.5 ||D x - y||_2^2 + lambda ||x||_1 with an explicit operator D. The
/// half on the data term is what makes the step below its proximal gradient.
struct IstaProblem {
    Eigen::MatrixXd D;
    Eigen::VectorXd y;
    double lambda = 0;

    std::size_t rows() const { return static_cast<std::size_t>(D.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(D.cols()); }
    /// Throws InputError on inconsistent sizes, negative lambda or non-finite entries.
    void validate() const;
};

struct IstaSolverConfig {
    /// Step size; values <= 0 select 0.99 / L with L from power iteration.
    double alpha = 0;
    std::size_t max_iters = 10000;
    /// Stop once |f_k - f_{k+1}| / |f_k| falls below this.
    double tol = 1e-10;
};

struct IstaTrace {
    std::vector<Eigen::VectorXd> iterates;  ///< x_0 .. x_k
    std::vector<double> objectives;         ///< f(x_0) .. f(x_k)
    std::vector<double> residuals;          ///< ||D x_i - y||_2
    double alpha = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

double objective(const IstaProblem& problem, const Eigen::VectorXd& x);

/// T_{lambda*alpha}(x - alpha * D^T (D x - y)).
Eigen::VectorXd ista_step(const IstaProblem& problem, const Eigen::VectorXd& x, double alpha);

/// T_{lambda*alpha}((E - alpha D^T D) x + alpha D^T y), with the gram matrix formed explicitly.
Eigen::VectorXd ista_step_affine(const IstaProblem& problem, const Eigen::VectorXd& x, double alpha);

/// One step reusing a caller-supplied D^T y; this is the loop body of solve().
Eigen::VectorXd ista_step_precomputed(const IstaProblem& problem, const Eigen::VectorXd& x, double alpha,
                                      const Eigen::VectorXd& dty);

/// Largest eigenvalue of D^T D by power iteration.
double lipschitz_constant(const Eigen::MatrixXd& D, std::size_t iterations = 50);

/// Elementwise soft threshold of a vector.
Eigen::VectorXd shrink(const Eigen::VectorXd& v, double threshold);

struct IstaResult {
    Eigen::VectorXd solution;
    IstaTrace trace;
};

/// Iterates from x = 0. D^T y is computed once before the loop.
IstaResult solve(const IstaProblem& problem, const IstaSolverConfig& config = {});

/// True iff ||ista_step(x) - x||_inf < 1e-8.
bool check_fixed_point(const IstaProblem& problem, const Eigen::VectorXd& x, double alpha);

/// Plain-text problem: "m n", m rows of D, m values of y, then lambda.
IstaProblem read_problem(std::istream& in);
IstaProblem read_problem_file(const std::string& path);

/// CSV with header iter,objective,residual.
void write_trace_csv(const IstaTrace& trace, std::ostream& out);

} // namespace istar::ista
