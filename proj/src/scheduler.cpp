#include "evgrid/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <thread>

#include "evgrid/error.hpp"
#include "evgrid/kernels.hpp"

namespace evgrid::scheduler {

namespace {

constexpr double kEnergyTolerance = 1e-10;  // kWh
constexpr int kBisectionCap = 200;

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw ValidationError(std::string(what) + " contains a non-finite value");
    }
}

double energy_slack(double energy) { return 1e-9 * std::max(1.0, std::abs(energy)); }

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index writes
// only its own output, so the result does not depend on scheduling. The
// first failure by index is rethrown.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body body) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    {
        std::vector<std::jthread> pool;
        const std::size_t count = std::min(workers, n);
        pool.reserve(count);
        for (std::size_t w = 0; w < count; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < n; i += count) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

void SchedulerConfig::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("scheduler: lambda must be positive");
    if (!(epsilon > 0.0)) throw ValidationError("scheduler: epsilon must be positive");
    if (max_iterations < 1) throw ValidationError("scheduler: max_iterations must be >= 1");
    if (slots < 1) throw ValidationError("scheduler: slots must be >= 1");
    if (!(slot_hours > 0.0)) throw ValidationError("scheduler: slot_hours must be positive");
    if (!(price_scale > 0.0)) throw ValidationError("scheduler: price_scale must be positive");
    if (threads < 1) throw ValidationError("scheduler: threads must be >= 1");
}

double StationProblem::min_energy_kwh(double slot_hours) const {
    double s = 0.0;
    for (double x : lower_kw) s += x;
    return s * slot_hours;
}

double StationProblem::max_energy_kwh(double slot_hours) const {
    double s = 0.0;
    for (double x : upper_kw) s += x;
    return s * slot_hours;
}

StationProblem make_station_problem(const fleet::EvSession& session, int slots) {
    if (!(0 <= session.t_start && session.t_start < session.t_end && session.t_end <= slots)) {
        throw ValidationError("session " + session.ev_id + ": window outside the horizon");
    }
    StationProblem p;
    p.ev_id = session.ev_id;
    p.lower_kw.assign(static_cast<std::size_t>(slots), 0.0);
    p.upper_kw.assign(static_cast<std::size_t>(slots), 0.0);
    for (int t = session.t_start; t < session.t_end; ++t) {
        p.lower_kw[static_cast<std::size_t>(t)] = session.d_max_kw;
        p.upper_kw[static_cast<std::size_t>(t)] = session.p_max_kw;
    }
    p.energy_kwh = session.energy_kwh;
    return p;
}

std::vector<double> aggregate_mw(std::span<const ChargingProfile> profiles, std::size_t slots) {
    std::vector<double> total(slots, 0.0);
    for (const auto& p : profiles) {
        if (p.values.size() != slots) throw ValidationError("profile length does not match the horizon");
        kernels::accumulate_scaled(total, p.values, 1e-3);
    }
    return total;
}

ControlSignal compute_control_signal(std::span<const double> base_mw, std::span<const ChargingProfile> profiles,
                                     double lambda, int iteration) {
    if (profiles.empty()) throw ValidationError("control signal undefined with no EVs online");
    if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
    auto total = aggregate_mw(profiles, base_mw.size());
    const double scale = 1.0 / (lambda * static_cast<double>(profiles.size()));
    ControlSignal c;
    c.iteration = iteration;
    c.values.resize(base_mw.size());
    for (std::size_t t = 0; t < base_mw.size(); ++t) c.values[t] = (base_mw[t] + total[t]) * scale;
    check_finite(c.values, "control signal");
    return c;
}

double flattening_objective(std::span<const double> base_mw, std::span<const ChargingProfile> profiles) {
    const auto total = aggregate_mw(profiles, base_mw.size());
    return kernels::sum_squares_of_sum(base_mw, total);
}

ChargingProfile solve_station_subproblem(const ControlSignal& signal, const ChargingProfile& previous,
                                         const StationProblem& problem, const SchedulerConfig& config) {
    const auto n = problem.lower_kw.size();
    if (problem.upper_kw.size() != n || signal.values.size() != n || previous.values.size() != n) {
        throw ValidationError("station " + problem.ev_id + ": signal, previous and bounds must share one length");
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (problem.lower_kw[t] > problem.upper_kw[t]) {
            throw ValidationError("station " + problem.ev_id + ": lower bound above upper bound at slot " +
                                  std::to_string(t));
        }
    }
    const double dt = config.slot_hours;
    const double target = problem.energy_kwh / dt;  // required sum of p over slots
    const double lo_e = problem.min_energy_kwh(dt);
    const double hi_e = problem.max_energy_kwh(dt);
    const double slack = energy_slack(problem.energy_kwh);
    if (problem.energy_kwh < lo_e - slack || problem.energy_kwh > hi_e + slack) {
        throw InfeasibleSessionError(problem.ev_id, problem.energy_kwh, lo_e, hi_e);
    }

    ChargingProfile out;
    if (problem.energy_kwh >= hi_e - kEnergyTolerance * 1e-3) {
        out.values = problem.upper_kw;
        return out;
    }
    if (problem.energy_kwh <= lo_e + kEnergyTolerance * 1e-3) {
        out.values = problem.lower_kw;
        return out;
    }

    std::vector<double> a(n);
    kernels::subtract_scaled(a, previous.values, signal.values, config.price_scale);
    check_finite(a, "subproblem anchor");

    // The energy sum is nondecreasing in the shift; every slot sits at its
    // lower bound below shift_lo and at its upper bound above shift_hi.
    double shift_lo = std::numeric_limits<double>::infinity();
    double shift_hi = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
        if (problem.lower_kw[t] == problem.upper_kw[t]) continue;
        shift_lo = std::min(shift_lo, problem.lower_kw[t] - a[t]);
        shift_hi = std::max(shift_hi, problem.upper_kw[t] - a[t]);
    }
    const double* lo = problem.lower_kw.data();
    const double* hi = problem.upper_kw.data();
    const auto sum_at = [&](double shift) { return kernels::active().clamp_shift_sum(a.data(), shift, lo, hi, n); };

    const double tol = kEnergyTolerance / dt;
    double shift = 0.5 * (shift_lo + shift_hi);
    for (int it = 0; it < kBisectionCap; ++it) {
        shift = 0.5 * (shift_lo + shift_hi);
        const double r = sum_at(shift) - target;
        if (std::abs(r) <= tol) break;
        if (r < 0.0) {
            shift_lo = shift;
        } else {
            shift_hi = shift;
        }
        const double mid = 0.5 * (shift_lo + shift_hi);
        if (!(shift_lo < mid && mid < shift_hi)) break;
    }

    // Solve the energy equality exactly on the active set found above.
    double fixed = 0.0;
    double free_sum = 0.0;
    int free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double v = a[t] + shift;
        if (v <= lo[t]) {
            fixed += lo[t];
        } else if (v >= hi[t]) {
            fixed += hi[t];
        } else {
            free_sum += a[t];
            ++free_count;
        }
    }
    if (free_count > 0) {
        const double exact = (target - fixed - free_sum) / free_count;
        if (std::abs(sum_at(exact) - target) <= std::abs(sum_at(shift) - target)) shift = exact;
    }
    out.values.resize(n);
    kernels::clamp_shift(out.values, a, shift, problem.lower_kw, problem.upper_kw);
    return out;
}

ChargingProfile solve_station_subproblem(const ControlSignal& signal, const ChargingProfile& previous,
                                         const fleet::EvSession& session, const SchedulerConfig& config) {
    return solve_station_subproblem(signal, previous, make_station_problem(session, config.slots), config);
}

Exchange local_exchange(std::span<const StationProblem> problems, const SchedulerConfig& config) {
    auto owned = std::make_shared<const std::vector<StationProblem>>(problems.begin(), problems.end());
    return [owned, config](const ControlSignal& broadcast, std::span<const ChargingProfile> previous) {
        const auto& ps = *owned;
        if (previous.size() != ps.size()) throw ValidationError("exchange: one previous profile per station required");
        std::vector<ChargingProfile> next(ps.size());
        parallel_for(ps.size(), config.threads,
                     [&](std::size_t i) { next[i] = solve_station_subproblem(broadcast, previous[i], ps[i], config); });
        return next;
    };
}

namespace {

void check_inputs(const SchedulerConfig& config, std::span<const double> base_mw,
                  std::span<const StationProblem> problems) {
    config.validate();
    const auto slots = static_cast<std::size_t>(config.slots);
    if (base_mw.size() != slots) throw ValidationError("base load length does not match the horizon");
    check_finite(base_mw, "base load");
    for (const auto& p : problems) {
        if (p.lower_kw.size() != slots || p.upper_kw.size() != slots) {
            throw ValidationError("station " + p.ev_id + ": bounds do not match the horizon");
        }
    }
}

ScheduleResult iterate(const SchedulerConfig& config, std::span<const double> base_mw,
                       std::vector<ChargingProfile> profiles, ControlSignal broadcast, Exchange& exchange,
                       double initial_objective) {
    ScheduleResult result;
    auto& trace = result.trace;
    trace.initial_objective = initial_objective;

    ResumeState best{profiles, broadcast};
    double best_objective = std::numeric_limits<double>::infinity();
    double best_residual = std::numeric_limits<double>::infinity();
    const int first = broadcast.iteration + 1;

    for (int i = first; i < first + config.max_iterations; ++i) {
        auto next = exchange(broadcast, profiles);
        if (next.size() != profiles.size()) throw ValidationError("exchange returned the wrong number of profiles");
        auto signal = compute_control_signal(base_mw, next, config.lambda, i);
        const double residual = kernels::max_abs_diff(signal.values, broadcast.values);
        const double objective = flattening_objective(base_mw, next);

        if (!trace.entries.empty()) {
            const double prev = trace.entries.back().objective;
            if (objective > prev + 1e-12 * std::max(1.0, std::abs(prev))) trace.objective_increases.push_back(i);
        }
        trace.entries.push_back({i, residual, objective});
        ++trace.iterations;

        profiles = std::move(next);
        if (objective < best_objective) {
            best_objective = objective;
            best_residual = residual;
            best = {profiles, broadcast};
        }
        if (residual <= config.epsilon) {
            trace.converged = true;
            trace.final_residual = residual;
            result.resume = {profiles, broadcast};
            result.profiles = std::move(profiles);
            return result;
        }
        broadcast = std::move(signal);
    }
    trace.final_residual = best_residual;
    result.profiles = best.profiles;
    result.resume = std::move(best);
    return result;
}

}  // namespace

ScheduleResult run_until_converged(const SchedulerConfig& config, std::span<const double> base_mw,
                                   std::span<const StationProblem> problems,
                                   std::optional<std::vector<ChargingProfile>> initial, Exchange exchange) {
    check_inputs(config, base_mw, problems);
    const auto slots = static_cast<std::size_t>(config.slots);

    if (problems.empty()) {
        ScheduleResult r;
        const double objective = flattening_objective(base_mw, {});
        r.trace.initial_objective = objective;
        r.trace.entries.push_back({1, 0.0, objective});
        r.trace.iterations = 1;
        r.trace.converged = true;
        return r;
    }

    std::vector<ChargingProfile> profiles;
    if (initial) {
        if (initial->size() != problems.size()) throw ValidationError("initial profiles: one per station required");
        for (const auto& p : *initial) {
            if (p.values.size() != slots) throw ValidationError("initial profile length does not match the horizon");
            check_finite(p.values, "initial profile");
        }
        profiles = std::move(*initial);
    } else {
        profiles.assign(problems.size(), ChargingProfile{std::vector<double>(slots, 0.0)});
    }
    if (!exchange) exchange = local_exchange(problems, config);

    auto broadcast = compute_control_signal(base_mw, profiles, config.lambda, 0);
    const double initial_objective = flattening_objective(base_mw, profiles);
    return iterate(config, base_mw, std::move(profiles), std::move(broadcast), exchange, initial_objective);
}

ScheduleResult resume_until_converged(const SchedulerConfig& config, std::span<const double> base_mw,
                                      std::span<const StationProblem> problems, ResumeState state,
                                      Exchange exchange) {
    check_inputs(config, base_mw, problems);
    if (state.profiles.size() != problems.size()) {
        throw ValidationError("resume state: one profile per station required");
    }
    if (problems.empty()) return run_until_converged(config, base_mw, problems, std::nullopt, exchange);
    if (state.broadcast.values.size() != base_mw.size()) {
        throw ValidationError("resume state: broadcast length does not match the horizon");
    }

    const double objective = flattening_objective(base_mw, state.profiles);
    const auto signal = compute_control_signal(base_mw, state.profiles, config.lambda, state.broadcast.iteration + 1);
    const double residual = kernels::max_abs_diff(signal.values, state.broadcast.values);
    if (residual <= config.epsilon) {
        ScheduleResult r;
        r.profiles = state.profiles;
        r.trace.initial_objective = objective;
        r.trace.final_residual = residual;
        r.trace.converged = true;
        r.resume = std::move(state);
        return r;
    }
    if (!exchange) exchange = local_exchange(problems, config);
    auto base_signal = compute_control_signal(base_mw, state.profiles, config.lambda, state.broadcast.iteration);
    return iterate(config, base_mw, std::move(state.profiles), std::move(base_signal), exchange, objective);
}

}  // namespace evgrid::scheduler
