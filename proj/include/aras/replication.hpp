#pragma once

#include "aras/mapping.hpp"
#include "aras/model.hpp"

#include <optional>
#include <vector>

namespace aras
{

enum class ReplicationBranch
{
    /// Not even one copy of L fits: write what fits, no replication.
    Partial,
    /// L fits but L and L+1 do not: replicate L into the free rows.
    ReplicateSingle,
    /// Several layers fit: trade trailing layers for replicas of the longest ones.
    Window,
};

const char* to_string(ReplicationBranch branch);

struct ReplicationPlan
{
    ReplicationBranch branch = ReplicationBranch::Partial;
    int first_layer = 0;  // L
    int free_rows = 0;
    /// K returned by get_number_of_layers (branch Window only).
    int initial_window = 0;
    /// Layers written now: [first_layer, first_layer + replication.size()).
    std::vector<int> replication;
    std::vector<int> allocated_rows;
    /// The first layer held back for later writing, if any.
    std::optional<int> deferred_layer;
    int iterations = 0;
    Cycles write_latency_threshold = 0;  // WL
    Cycles interior_compute = 0;         // sum of ComL over the window interior at the stop

    int last_layer() const { return first_layer + static_cast<int>(replication.size()) - 1; }
    int rows_used() const;
    bool replicates() const;
};

/// Largest K such that layers [L, L + K) fit in free_rows together, capped at the remaining layers.
int get_number_of_layers(int free_rows, int L, const std::vector<ResourceRequirement>& reqs);

struct ReplicaCandidate
{
    int layer_id = 0;
    int resources = 1;
    std::uint64_t windows = 1;
    int replicas = 1;  // current R
};

/// Greedily grants whole replicas to the candidate with the longest current
/// compute latency (lowest id on ties) while one fits. Updates replicas in
/// place and returns the rows left over.
int replicate_longest_layers(int free_rows, std::vector<ReplicaCandidate>& candidates, const ValidatedConfig& config);

/// Write latency charged to deferred layers: streaming every crossbar's deltas
/// plus one full worst-case crossbar write.
Cycles deferred_write_latency(const std::vector<ResourceRequirement>& reqs, const NetworkModel& network, int first,
                              int last, const ValidatedConfig& config);

/// The replication decision for layer L given the free PE rows.
ReplicationPlan replication_scheme(int free_rows, int L, const NetworkModel& network,
                                   const std::vector<ResourceRequirement>& reqs, const ValidatedConfig& config);

/// Every plan replication_scheme passes through, ending with its result. In the
/// window branch the plans keep the whole window or trim it one layer at a time;
/// each comes with variants that minimize the summed compute latency or serve layer L first.
std::vector<ReplicationPlan> replication_trajectory(int free_rows, int L, const NetworkModel& network,
                                                   const std::vector<ResourceRequirement>& reqs,
                                                   const ValidatedConfig& config);

}  // namespace aras
