#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bacsa/matrix.hpp"

namespace bacsa::selection {

struct SelectionState {
    std::vector<int> times_selected;  // per-client pick count, never decremented
    int round = 1;
    double exploration_weight = 0.05;  // gamma
    double scaling = 1.0;              // theta
    std::vector<double> snr;           // linear, > 0; all ones for channel-blind policies
    int n_select = 5;
};

SelectionState make_state(int clients, int n_select, double gamma, double theta);

// How the class-balance term is scored: deviation of the selected group's
// pooled profile from uniform (default), or the summed per-client deviation
// from the group mean.
enum class ObjectiveKind { group_balance, per_client_variance };

struct ObjectiveTerms {
    double balance = 0.0;
    double exploration = 0.0;
    double total() const { return balance + exploration; }
};

struct SelectionResult {
    std::vector<int> chosen;  // sorted client ids
    double objective = 0.0;
    double balance_term = 0.0;
    double exploration_term = 0.0;
    std::size_t subsets_evaluated = 0;
};

// Binomial coefficient, saturating at 2^63-1.
std::uint64_t subset_count(int n, int k);

ObjectiveTerms objective_terms(const std::vector<int>& subset, const Matrix& beta,
                               const SelectionState& state,
                               ObjectiveKind kind = ObjectiveKind::group_balance);
double objective(const std::vector<int>& subset, const Matrix& beta, const SelectionState& state,
                 ObjectiveKind kind = ObjectiveKind::group_balance);

// Global minimizer over all n_select-subsets; ties resolve to the
// lexicographically smallest id set. Refuses instances past the enumeration
// budget of 1e6 subsets.
SelectionResult select_exhaustive(const Matrix& beta, const SelectionState& state,
                                  ObjectiveKind kind = ObjectiveKind::group_balance);

// Greedy build-up followed by best-improvement single swaps; scalable
// fallback when enumeration is off the table.
SelectionResult select_greedy_swap(const Matrix& beta, const SelectionState& state,
                                   ObjectiveKind kind = ObjectiveKind::group_balance);

SelectionResult select_random(int clients, int n_select, std::uint64_t seed);

// Pure balance baseline: greedy build-up with the exploration term forced off;
// ignores counts and channel state entirely.
SelectionResult select_greedy_balance(const Matrix& beta, int n_select);

void record_selection(SelectionState& state, const std::vector<int>& chosen);

} // namespace bacsa::selection
