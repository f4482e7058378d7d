#pragma once

#include "aras/model.hpp"

#include <optional>
#include <vector>

namespace aras
{

/// The activation footprint does not fit the inventory in one pass.
class SegmentRequired : public Error
{
public:
    explicit SegmentRequired(std::uint64_t shortfall);
    std::uint64_t shortfall() const noexcept { return shortfall_; }

private:
    std::uint64_t shortfall_;
};

struct BankAssignment
{
    int layer_id = 0;
    std::vector<int> input_banks;   // ascending ids
    std::vector<int> output_banks;  // ascending ids
    double total_leakage = 0.0;     // joules per cycle

    /// Union of both roles, ascending.
    std::vector<int> selected() const;
    bool operator==(const BankAssignment&) const = default;
};

/// Exact leakage-minimal cover of input_bytes and output_bytes by disjoint bank
/// sets. Equal-leakage optima are ordered by the selected id set, then by the
/// input id set, both compared lexicographically. When fixed_input is given,
/// exactly those banks hold the input and the output is chosen from the rest.
BankAssignment solve_bank_selection(std::uint64_t input_bytes, std::uint64_t output_bytes,
                                    const std::vector<BankSpec>& inventory,
                                    const std::optional<std::vector<int>>& fixed_input = std::nullopt);

BankAssignment solve_bank_selection(const LayerDescriptor& layer, const std::vector<BankSpec>& inventory);

/// Sum of leakage over the selected banks, accumulated in ascending id order.
double static_power_of_assignment(const BankAssignment& assignment, const std::vector<BankSpec>& inventory);

/// Leakage of an arbitrary bank id set, in ascending id order.
double leakage_of(const std::vector<int>& banks, const std::vector<BankSpec>& inventory);

}  // namespace aras
