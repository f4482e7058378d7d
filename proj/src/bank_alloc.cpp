#include "aras/bank_alloc.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <set>

namespace aras
{

SegmentRequired::SegmentRequired(std::uint64_t shortfall)
    : Error(fmt::format("segment required: activations exceed the bank inventory by {} bytes", shortfall))
    , shortfall_(shortfall)
{}

std::vector<int> BankAssignment::selected() const
{
    std::vector<int> s = input_banks;
    s.insert(s.end(), output_banks.begin(), output_banks.end());
    std::sort(s.begin(), s.end());
    return s;
}

double leakage_of(const std::vector<int>& banks, const std::vector<BankSpec>& inventory)
{
    std::vector<int> ids = banks;
    std::sort(ids.begin(), ids.end());
    double sum = 0.0;
    for (int id : ids)
    {
        if (id < 0 || id >= static_cast<int>(inventory.size()))
            throw Error(fmt::format("unknown bank id {}", id));
        sum += inventory[id].leakage;
    }
    return sum;
}

double static_power_of_assignment(const BankAssignment& a, const std::vector<BankSpec>& inventory)
{
    return leakage_of(a.selected(), inventory);
}

namespace
{

enum Role : std::uint8_t
{
    Unused = 0,
    Input = 1,
    Output = 2,
};

constexpr std::uint8_t allow(Role r)
{
    return static_cast<std::uint8_t>(1u << r);
}

struct Search
{
    const std::vector<BankSpec>& banks;
    const std::vector<std::uint8_t>& allowed;
    std::uint64_t need_in;
    std::uint64_t need_out;
    std::vector<std::uint64_t> suffix_in;   // capacity still assignable to input from bank i on
    std::vector<std::uint64_t> suffix_out;  // same for output
    std::vector<std::uint64_t> suffix_any;

    std::vector<Role> roles;
    bool found = false;
    double best_leak = 0.0;
    std::vector<int> best_set;
    std::vector<int> best_in;
    std::vector<Role> best_roles;

    void run()
    {
        const std::size_t n = banks.size();
        suffix_in.assign(n + 1, 0);
        suffix_out.assign(n + 1, 0);
        suffix_any.assign(n + 1, 0);
        for (std::size_t i = n; i-- > 0;)
        {
            suffix_in[i] = suffix_in[i + 1] + ((allowed[i] & allow(Input)) ? banks[i].capacity : 0);
            suffix_out[i] = suffix_out[i + 1] + ((allowed[i] & allow(Output)) ? banks[i].capacity : 0);
            suffix_any[i] = suffix_any[i + 1] + ((allowed[i] & (allow(Input) | allow(Output))) ? banks[i].capacity : 0);
        }
        roles.assign(n, Unused);
        dfs(0, 0, 0, 0.0);
    }

    void consider(double leak)
    {
        std::vector<int> set;
        std::vector<int> in;
        for (std::size_t i = 0; i < roles.size(); ++i)
        {
            if (roles[i] != Unused)
                set.push_back(static_cast<int>(i));
            if (roles[i] == Input)
                in.push_back(static_cast<int>(i));
        }
        bool better = !found || leak < best_leak;
        if (found && leak == best_leak)
            better = set < best_set || (set == best_set && in < best_in);
        if (better)
        {
            found = true;
            best_leak = leak;
            best_set = std::move(set);
            best_in = std::move(in);
            best_roles = roles;
        }
    }

    void dfs(std::size_t i, std::uint64_t cap_in, std::uint64_t cap_out, double leak)
    {
        if (found && leak > best_leak)
            return;
        const std::uint64_t rem_in = cap_in >= need_in ? 0 : need_in - cap_in;
        const std::uint64_t rem_out = cap_out >= need_out ? 0 : need_out - cap_out;
        if (i == banks.size())
        {
            if (rem_in == 0 && rem_out == 0)
                consider(leak);
            return;
        }
        if (rem_in > suffix_in[i] || rem_out > suffix_out[i] || rem_in + rem_out > suffix_any[i])
            return;
        if (allowed[i] & allow(Input))
        {
            roles[i] = Input;
            dfs(i + 1, cap_in + banks[i].capacity, cap_out, leak + banks[i].leakage);
        }
        if (allowed[i] & allow(Output))
        {
            roles[i] = Output;
            dfs(i + 1, cap_in, cap_out + banks[i].capacity, leak + banks[i].leakage);
        }
        if (allowed[i] & allow(Unused))
        {
            roles[i] = Unused;
            dfs(i + 1, cap_in, cap_out, leak);
        }
        roles[i] = Unused;
    }
};

/// Smallest total uncovered bytes over all disjoint input/output splits.
std::uint64_t minimal_deficit(std::uint64_t need_in, std::uint64_t need_out, const std::vector<BankSpec>& banks,
                              const std::vector<std::uint8_t>& allowed)
{
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < banks.size(); ++i)
        if (allowed[i] & (allow(Input) | allow(Output)))
            total += banks[i].capacity;
    const std::uint64_t need = need_in + need_out;
    std::uint64_t best = need > total ? need - total : 0;
    if (banks.size() > 20)
        return std::max<std::uint64_t>(best, 1);

    best = need;
    const std::uint32_t subsets = 1u << banks.size();
    for (std::uint32_t mask = 0; mask < subsets; ++mask)
    {
        std::uint64_t cap_in = 0;
        std::uint64_t cap_out = 0;
        bool ok = true;
        for (std::size_t i = 0; i < banks.size() && ok; ++i)
        {
            const bool as_input = mask & (1u << i);
            if (as_input)
            {
                if (!(allowed[i] & allow(Input)))
                    ok = false;
                cap_in += banks[i].capacity;
            }
            else
            {
                if (!(allowed[i] & (allow(Output) | allow(Unused))))
                    ok = false;
                if (allowed[i] & allow(Output))
                    cap_out += banks[i].capacity;
            }
        }
        if (!ok)
            continue;
        const std::uint64_t d = (need_in > cap_in ? need_in - cap_in : 0) + (need_out > cap_out ? need_out - cap_out : 0);
        best = std::min(best, d);
    }
    return std::max<std::uint64_t>(best, 1);
}

}  // namespace

BankAssignment solve_bank_selection(std::uint64_t input_bytes, std::uint64_t output_bytes,
                                    const std::vector<BankSpec>& inventory,
                                    const std::optional<std::vector<int>>& fixed_input)
{
    for (std::size_t i = 0; i < inventory.size(); ++i)
        if (inventory[i].id != static_cast<int>(i))
            throw Error("bank ids must be contiguous from 0");

    std::vector<std::uint8_t> allowed(inventory.size(), allow(Unused) | allow(Input) | allow(Output));
    if (fixed_input)
    {
        std::set<int> fixed(fixed_input->begin(), fixed_input->end());
        for (int id : fixed)
            if (id < 0 || id >= static_cast<int>(inventory.size()))
                throw Error(fmt::format("unknown bank id {}", id));
        for (std::size_t i = 0; i < inventory.size(); ++i)
            allowed[i] = fixed.count(static_cast<int>(i)) ? allow(Input) : (allow(Unused) | allow(Output));
    }

    Search s{inventory, allowed, input_bytes, output_bytes, {}, {}, {}, {}, false, 0.0, {}, {}, {}};
    s.run();
    if (!s.found)
        throw SegmentRequired(minimal_deficit(input_bytes, output_bytes, inventory, allowed));

    BankAssignment a;
    for (std::size_t i = 0; i < s.best_roles.size(); ++i)
    {
        if (s.best_roles[i] == Input)
            a.input_banks.push_back(static_cast<int>(i));
        else if (s.best_roles[i] == Output)
            a.output_banks.push_back(static_cast<int>(i));
    }
    a.total_leakage = s.best_leak;
    return a;
}

BankAssignment solve_bank_selection(const LayerDescriptor& layer, const std::vector<BankSpec>& inventory)
{
    BankAssignment a = solve_bank_selection(layer.input_bytes, layer.output_bytes, inventory);
    a.layer_id = layer.id;
    return a;
}

}  // namespace aras
