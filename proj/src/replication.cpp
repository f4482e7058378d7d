#include "aras/replication.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <limits>
#include <numeric>

namespace aras
{

const char* to_string(ReplicationBranch branch)
{
    switch (branch)
    {
        case ReplicationBranch::Partial:
            return "partial";
        case ReplicationBranch::ReplicateSingle:
            return "replicate-single";
        case ReplicationBranch::Window:
            return "window";
    }
    return "?";
}

int ReplicationPlan::rows_used() const
{
    return std::accumulate(allocated_rows.begin(), allocated_rows.end(), 0);
}

bool ReplicationPlan::replicates() const
{
    return std::any_of(replication.begin(), replication.end(), [](int r) { return r > 1; });
}

int get_number_of_layers(int free_rows, int L, const std::vector<ResourceRequirement>& reqs)
{
    int k = 0;
    long long used = 0;
    for (std::size_t l = static_cast<std::size_t>(L); l < reqs.size(); ++l)
    {
        used += reqs[l].pe_rows_needed;
        if (used > free_rows)
            break;
        ++k;
    }
    return k;
}

int replicate_longest_layers(int free_rows, std::vector<ReplicaCandidate>& candidates, const ValidatedConfig& config)
{
    const Cycles per_window = static_cast<Cycles>(config->activation_bits) * config->crossbar_compute_latency;
    for (;;)
    {
        ReplicaCandidate* pick = nullptr;
        Cycles pick_lat = 0;
        for (ReplicaCandidate& c : candidates)
        {
            if (c.resources > free_rows || static_cast<std::uint64_t>(c.replicas) >= c.windows)
                continue;
            const Cycles lat = (c.windows + c.replicas - 1) / c.replicas * per_window;
            if (!pick || lat > pick_lat || (lat == pick_lat && c.layer_id < pick->layer_id))
            {
                pick = &c;
                pick_lat = lat;
            }
        }
        if (!pick)
            return free_rows;
        ++pick->replicas;
        free_rows -= pick->resources;
    }
}

Cycles deferred_write_latency(const std::vector<ResourceRequirement>& reqs, const NetworkModel& network, int first,
                              int last, const ValidatedConfig& config)
{
    Cycles fetch = 0;
    for (int l = first; l <= last; ++l)
    {
        const ResourceRequirement& r = reqs[l];
        for (int v = 0; v < r.vertical_slices; ++v)
            for (int h = 0; h < r.horizontal_slices; ++h)
            {
                const std::uint64_t cells = slice_populated_cells(network.layers[l].desc, r, v, h, config);
                fetch += config.fetch_cycles((cells + 1) / 2);
            }
    }
    return fetch + config.crossbar_write_latency();
}

std::vector<ReplicationPlan> replication_trajectory(int free_rows, int L, const NetworkModel& network,
                                                   const std::vector<ResourceRequirement>& reqs,
                                                   const ValidatedConfig& config)
{
    const int n = static_cast<int>(reqs.size());
    if (L < 0 || L >= n)
        throw Error(fmt::format("replication planning for layer {} outside the network", L));
    if (free_rows < 0)
        throw Error("negative free resources");

    ReplicationPlan plan;
    plan.first_layer = L;
    plan.free_rows = free_rows;
    const ResourceRequirement& rl = reqs[L];

    if (free_rows < rl.pe_rows_needed)
    {
        plan.branch = ReplicationBranch::Partial;
        plan.replication = {1};
        plan.allocated_rows = {free_rows};
        return {plan};
    }

    if (L + 1 >= n || free_rows < rl.pe_rows_needed + reqs[L + 1].pe_rows_needed)
    {
        plan.branch = ReplicationBranch::ReplicateSingle;
        int r = 1;
        if (rl.is_conv)
            r = static_cast<int>(std::min<std::uint64_t>(free_rows / rl.pe_rows_needed, rl.num_windows));
        plan.replication = {r};
        plan.allocated_rows = {r * rl.pe_rows_needed};
        return {plan};
    }

    plan.branch = ReplicationBranch::Window;
    int K = get_number_of_layers(free_rows, L, reqs);
    plan.initial_window = K;
    const int top = L + K - 1;
    int left = free_rows;
    for (int l = L; l <= top; ++l)
        left -= reqs[l].pe_rows_needed;

    std::vector<ReplicaCandidate> cands;
    for (int l = L; l <= top; ++l)
        if (reqs[l].is_conv)
            cands.push_back({l, reqs[l].pe_rows_needed, reqs[l].num_windows, 1});

    const auto snapshot = [&](ReplicationPlan p, int last) {
        for (int l = L; l <= last; ++l)
        {
            int r = 1;
            for (const ReplicaCandidate& c : cands)
                if (c.layer_id == l)
                    r = c.replicas;
            p.replication.push_back(r);
            p.allocated_rows.push_back(r * reqs[l].pe_rows_needed);
        }
        return p;
    };

    std::vector<ReplicationPlan> out;
    // Besides the greedy grants, every step offers the replica split that
    // minimizes the summed compute latency of the candidates.
    const auto balanced_variant = [&](const ReplicationPlan& p, int rows, int last) {
        std::vector<ReplicaCandidate> saved = cands;
        for (const ReplicaCandidate& c : cands)
            rows += (c.replicas - 1) * c.resources;
        if (rows > 0 && !cands.empty())
        {
            const std::size_t m = cands.size();
            const std::size_t width = static_cast<std::size_t>(rows) + 1;
            constexpr Cycles inf = std::numeric_limits<Cycles>::max();
            // cost[i][b]: least summed latency of candidates i.. using at most b extra rows.
            std::vector<Cycles> cost((m + 1) * width, 0);
            std::vector<int> pick(m * width, 0);
            for (std::size_t i = m; i-- > 0;)
            {
                const ReplicaCandidate& c = cands[i];
                const ResourceRequirement& q = reqs[c.layer_id];
                for (int b = 0; b <= rows; ++b)
                {
                    Cycles best = inf;
                    int best_extra = 0;
                    for (int e = 0; e * c.resources <= b && static_cast<std::uint64_t>(e + 1) <= c.windows; ++e)
                    {
                        const Cycles v = layer_compute_latency(q, e + 1, config) +
                                         cost[(i + 1) * width + static_cast<std::size_t>(b - e * c.resources)];
                        if (v < best)
                        {
                            best = v;
                            best_extra = e;
                        }
                    }
                    cost[i * width + b] = best;
                    pick[i * width + b] = best_extra;
                }
            }
            int b = rows;
            for (std::size_t i = 0; i < m; ++i)
            {
                const int e = pick[i * width + b];
                cands[i].replicas = 1 + e;
                b -= e * cands[i].resources;
            }
            out.push_back(snapshot(p, last));
        }
        cands = std::move(saved);
    };

    // Layer L always computes in the open: a second variant grants it replicas first.
    const auto first_variant = [&](const ReplicationPlan& p, int rows, int last) {
        std::vector<ReplicaCandidate> saved = cands;
        if (!cands.empty() && cands.front().layer_id == L)
        {
            ReplicaCandidate& c = cands.front();
            while (rows >= c.resources && static_cast<std::uint64_t>(c.replicas) < c.windows)
            {
                rows -= c.resources;
                ++c.replicas;
            }
            replicate_longest_layers(rows, cands, config);
            out.push_back(snapshot(p, last));
        }
        cands = std::move(saved);
    };

    // Whole window kept, leftover rows spent on replicas.
    {
        balanced_variant(plan, left, top);
        first_variant(plan, left, top);
        std::vector<ReplicaCandidate> saved = cands;
        replicate_longest_layers(left, cands, config);
        out.push_back(snapshot(plan, top));
        cands = std::move(saved);
    }
    std::erase_if(cands, [&](const ReplicaCandidate& c) { return c.layer_id == top; });

    for (;;)
    {
        ++plan.iterations;
        const int deferred = L + K - 1;
        left += reqs[deferred].pe_rows_needed;
        auto it = std::find_if(cands.begin(), cands.end(), [&](const ReplicaCandidate& c) { return c.layer_id == deferred; });
        if (it != cands.end())
        {
            left += (it->replicas - 1) * it->resources;
            cands.erase(it);
        }
        balanced_variant(plan, left, L + K - 2);
        first_variant(plan, left, L + K - 2);
        left = replicate_longest_layers(left, cands, config);

        Cycles interior = 0;
        for (int l = L + 1; l <= L + K - 2; ++l)
        {
            int r = 1;
            for (const ReplicaCandidate& c : cands)
                if (c.layer_id == l)
                    r = c.replicas;
            interior += layer_compute_latency(reqs[l], r, config);
        }
        plan.interior_compute = interior;
        plan.write_latency_threshold = deferred_write_latency(reqs, network, deferred, top, config);
        plan.deferred_layer = deferred;
        out.push_back(snapshot(plan, L + K - 2));
        if (interior <= plan.write_latency_threshold || K <= 2)
            break;
        --K;
    }
    return out;
}

ReplicationPlan replication_scheme(int free_rows, int L, const NetworkModel& network,
                                   const std::vector<ResourceRequirement>& reqs, const ValidatedConfig& config)
{
    return replication_trajectory(free_rows, L, network, reqs, config).back();
}

}  // namespace aras
