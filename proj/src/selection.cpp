#include "bacsa/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace bacsa::selection {

namespace {

constexpr std::uint64_t kEnumerationBudget = 1000000;

void check_inputs(const Matrix& beta, const SelectionState& state) {
    const int clients = beta.cols();
    if (clients < 1) throw std::invalid_argument("selection: no clients");
    if (state.n_select < 1 || state.n_select > clients)
        throw std::invalid_argument("selection: n_select out of range");
    if (static_cast<int>(state.times_selected.size()) != clients ||
        static_cast<int>(state.snr.size()) != clients)
        throw std::invalid_argument("selection: state size does not match client count");
    if (state.round < 1) throw std::invalid_argument("selection: round must be >= 1");
    for (double s : state.snr)
        if (!(s > 0)) throw std::invalid_argument("selection: snr values must be positive");
    for (int m : state.times_selected)
        if (m < 0) throw std::invalid_argument("selection: negative selection count");
}

double exploration_cost(const SelectionState& state, int k) {
    const double inner = 3.0 * std::log(static_cast<double>(state.round)) * 2.0 *
                         state.times_selected[k] / (state.scaling * state.snr[k]);
    return state.exploration_weight * std::sqrt(std::max(0.0, inner));
}

SelectionResult finish(std::vector<int> chosen, const Matrix& beta, const SelectionState& state,
                       ObjectiveKind kind, std::size_t evaluated) {
    std::sort(chosen.begin(), chosen.end());
    const auto terms = objective_terms(chosen, beta, state, kind);
    SelectionResult result;
    result.chosen = std::move(chosen);
    result.objective = terms.total();
    result.balance_term = terms.balance;
    result.exploration_term = terms.exploration;
    result.subsets_evaluated = evaluated;
    return result;
}

// Greedy add-one-best phase shared by the swap policy and the balance baseline.
std::vector<int> greedy_build(const Matrix& beta, const SelectionState& state,
                              ObjectiveKind kind) {
    const int clients = beta.cols();
    std::vector<char> in_set(clients, 0);
    std::vector<int> chosen;
    chosen.reserve(state.n_select);
    for (int step = 0; step < state.n_select; ++step) {
        int best = -1;
        double best_value = std::numeric_limits<double>::infinity();
        for (int k = 0; k < clients; ++k) {
            if (in_set[k]) continue;
            chosen.push_back(k);
            const double value = objective(chosen, beta, state, kind);
            chosen.pop_back();
            if (value < best_value) {
                best_value = value;
                best = k;
            }
        }
        in_set[best] = 1;
        chosen.push_back(best);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

} // namespace

SelectionState make_state(int clients, int n_select, double gamma, double theta) {
    SelectionState state;
    state.times_selected.assign(clients, 0);
    state.snr.assign(clients, 1.0);
    state.n_select = n_select;
    state.exploration_weight = gamma;
    state.scaling = theta;
    return state;
}

std::uint64_t subset_count(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (int i = 1; i <= k; ++i) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / (n - k + i);
        if (result > limit) return std::numeric_limits<std::int64_t>::max();
        result = result * (n - k + i) / i;
    }
    return result;
}

ObjectiveTerms objective_terms(const std::vector<int>& subset, const Matrix& beta,
                               const SelectionState& state, ObjectiveKind kind) {
    if (subset.empty()) throw std::invalid_argument("objective: empty subset");
    const int classes = beta.rows();
    std::vector<double> pooled(classes, 0.0);
    for (int k : subset)
        for (int i = 0; i < classes; ++i) pooled[i] += beta(i, k);
    for (double& v : pooled) v /= subset.size();

    ObjectiveTerms terms;
    if (kind == ObjectiveKind::group_balance) {
        const double uniform = 1.0 / classes;
        for (int i = 0; i < classes; ++i) {
            const double d = pooled[i] - uniform;
            terms.balance += d * d;
        }
    } else {
        for (int k : subset)
            for (int i = 0; i < classes; ++i) {
                const double d = beta(i, k) - pooled[i];
                terms.balance += d * d;
            }
    }
    for (int k : subset) terms.exploration += exploration_cost(state, k);
    return terms;
}

double objective(const std::vector<int>& subset, const Matrix& beta, const SelectionState& state,
                 ObjectiveKind kind) {
    return objective_terms(subset, beta, state, kind).total();
}

SelectionResult select_exhaustive(const Matrix& beta, const SelectionState& state,
                                  ObjectiveKind kind) {
    check_inputs(beta, state);
    const int clients = beta.cols();
    const int n = state.n_select;
    if (subset_count(clients, n) > kEnumerationBudget)
        throw std::runtime_error("select_exhaustive: enumeration budget exceeded, use greedy");

    std::vector<int> subset(n);
    std::iota(subset.begin(), subset.end(), 0);
    std::vector<int> best;
    double best_value = std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;

    // Lexicographic combination walk; strict improvement keeps the first
    // (smallest) subset on ties.
    while (true) {
        ++evaluated;
        const double value = objective(subset, beta, state, kind);
        if (value < best_value) {
            best_value = value;
            best = subset;
        }
        int i = n - 1;
        while (i >= 0 && subset[i] == clients - n + i) --i;
        if (i < 0) break;
        ++subset[i];
        for (int j = i + 1; j < n; ++j) subset[j] = subset[j - 1] + 1;
    }
    return finish(std::move(best), beta, state, kind, evaluated);
}

SelectionResult select_greedy_swap(const Matrix& beta, const SelectionState& state,
                                   ObjectiveKind kind) {
    check_inputs(beta, state);
    const int clients = beta.cols();
    std::vector<int> chosen = greedy_build(beta, state, kind);
    std::vector<char> in_set(clients, 0);
    for (int k : chosen) in_set[k] = 1;

    double current = objective(chosen, beta, state, kind);
    std::size_t evaluated = 0;
    bool improved = true;
    while (improved) {
        improved = false;
        int best_pos = -1;
        int best_repl = -1;
        double best_value = current;
        for (std::size_t pos = 0; pos < chosen.size(); ++pos) {
            const int original = chosen[pos];
            for (int k = 0; k < clients; ++k) {
                if (in_set[k]) continue;
                chosen[pos] = k;
                const double value = objective(chosen, beta, state, kind);
                ++evaluated;
                if (value < best_value) {
                    best_value = value;
                    best_pos = static_cast<int>(pos);
                    best_repl = k;
                }
            }
            chosen[pos] = original;
        }
        if (best_pos >= 0) {
            in_set[chosen[best_pos]] = 0;
            in_set[best_repl] = 1;
            chosen[best_pos] = best_repl;
            current = best_value;
            improved = true;
        }
    }
    return finish(std::move(chosen), beta, state, kind, evaluated);
}

SelectionResult select_random(int clients, int n_select, std::uint64_t seed) {
    if (n_select < 1 || n_select > clients)
        throw std::invalid_argument("select_random: n_select out of range");
    std::mt19937_64 rng(seed);
    std::vector<int> ids(clients);
    std::iota(ids.begin(), ids.end(), 0);
    // partial Fisher-Yates: first n_select entries are a uniform subset
    for (int i = 0; i < n_select; ++i) {
        std::uniform_int_distribution<int> pick(i, clients - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    SelectionResult result;
    result.chosen.assign(ids.begin(), ids.begin() + n_select);
    std::sort(result.chosen.begin(), result.chosen.end());
    return result;
}

SelectionResult select_greedy_balance(const Matrix& beta, int n_select) {
    SelectionState state = make_state(beta.cols(), n_select, 0.0, 1.0);
    check_inputs(beta, state);
    std::vector<int> chosen = greedy_build(beta, state, ObjectiveKind::group_balance);
    return finish(std::move(chosen), beta, state, ObjectiveKind::group_balance, 0);
}

void record_selection(SelectionState& state, const std::vector<int>& chosen) {
    for (int k : chosen) {
        if (k < 0 || k >= static_cast<int>(state.times_selected.size()))
            throw std::invalid_argument("record_selection: client id out of range");
        state.times_selected[k] += 1;
    }
    state.round += 1;
}

} // namespace bacsa::selection
