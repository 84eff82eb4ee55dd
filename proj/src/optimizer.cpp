#include "mfvol/optimizer.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <memory>
#include <stdexcept>

namespace mfvol {

namespace {

constexpr double kPenalty = 1e100;

struct Callback {
    const std::function<double(std::span<const double>)>* f;
    std::size_t n;
};

double trampoline(const gsl_vector* v, void* params)
{
    const auto* cb = static_cast<const Callback*>(params);
    std::vector<double> x(cb->n);
    for (std::size_t i = 0; i < cb->n; ++i)
        x[i] = gsl_vector_get(v, i);
    const double y = (*cb->f)(x);
    return std::isfinite(y) ? y : kPenalty;
}

struct VectorDeleter {
    void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct MinimizerDeleter {
    void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

} // namespace

NelderMeadResult nelder_mead(
    const std::function<double(std::span<const double>)>& f, std::span<const double> start,
    const NelderMeadOptions& opts,
    const std::function<void(std::size_t, std::span<const double>, double)>& on_iteration)
{
    const std::size_t n = start.size();
    if (n == 0)
        throw std::invalid_argument("nelder_mead: empty starting point");
    if (!opts.initial_step.empty() && opts.initial_step.size() != n)
        throw std::invalid_argument("nelder_mead: step size vector has wrong length");
    gsl_set_error_handler_off();

    Callback cb{&f, n};
    gsl_multimin_function fn{&trampoline, n, &cb};

    std::unique_ptr<gsl_vector, VectorDeleter> x0(gsl_vector_alloc(n));
    std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(n));
    for (std::size_t i = 0; i < n; ++i) {
        gsl_vector_set(x0.get(), i, start[i]);
        gsl_vector_set(step.get(), i, opts.initial_step.empty() ? 0.1 : opts.initial_step[i]);
    }
    std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> m(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
    if (gsl_multimin_fminimizer_set(m.get(), &fn, x0.get(), step.get()) != GSL_SUCCESS)
        throw std::runtime_error("nelder_mead: could not initialise the simplex");

    NelderMeadResult res;
    std::vector<double> cur(n);
    for (res.iterations = 0; res.iterations < opts.max_iterations;) {
        const int status = gsl_multimin_fminimizer_iterate(m.get());
        ++res.iterations;
        if (status != GSL_SUCCESS)
            break;
        if (on_iteration) {
            for (std::size_t i = 0; i < n; ++i)
                cur[i] = gsl_vector_get(m->x, i);
            on_iteration(res.iterations, cur, m->fval);
        }
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), opts.size_tolerance) ==
            GSL_SUCCESS) {
            res.converged = true;
            break;
        }
    }
    res.x.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        res.x[i] = gsl_vector_get(m->x, i);
    res.value = m->fval;
    return res;
}

} // namespace mfvol
