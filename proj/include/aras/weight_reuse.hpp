#pragma once

#include "aras/mapping.hpp"
#include "aras/model.hpp"

#include <array>
#include <span>
#include <vector>

namespace aras
{

using WeightHistogram = std::array<std::uint64_t, 256>;

WeightHistogram weight_histogram(const QuantizedWeights& weights);

/// Per cell position, the probability of each cell level.
struct CellDistribution
{
    int levels = 4;
    std::vector<std::vector<double>> p;  // p[position][level], position 0 is the LSB slice

    int positions() const { return static_cast<int>(p.size()); }
};

CellDistribution cell_distribution(const QuantizedWeights& weights, const ValidatedConfig& config);
CellDistribution cell_distribution(const WeightHistogram& hist, const ValidatedConfig& config);

/// Probability that cell `position` (1-based, 1 = LSB slice) keeps its value
/// when an X-distributed weight is overwritten by a Y-distributed one.
double skipping_ratio(const CellDistribution& x, const CellDistribution& y, int position);

struct ShiftResult
{
    QuantizedWeights weights;
    int offset = 0;
    double clip_fraction = 0.0;
    double mean_abs_clip_error = 0.0;
};

/// offset = round(center - mean(w)); each output is clip(w + offset, 0, 2^n - 1).
ShiftResult shift_weights(const QuantizedWeights& weights, int center, int weight_bits);

struct LayerShift
{
    int offset = 0;
    double clip_fraction = 0.0;
    double mean_abs_clip_error = 0.0;
    int adjusted_zero_point = 0;
};

struct CenterEvaluation
{
    int center = 0;
    double score = 0.0;  // mean top-two-cell skipping ratio over consecutive pairs
    double worst_clip_fraction = 0.0;
    double total_clip_fraction = 0.0;
    bool survived = false;
};

struct ShiftPlan
{
    int center = 0;
    std::vector<LayerShift> layers;
    bool fallback = false;
    /// Set by the scheduler when the shifted weights would cost more pulses; offsets then read as 0.
    bool rejected = false;
    std::vector<CenterEvaluation> evaluations;

    bool applied() const { return !fallback && !rejected; }
    int offset(int layer) const { return layers.empty() || !applied() ? 0 : layers.at(layer).offset; }
};

inline const std::vector<int>& default_centers()
{
    static const std::vector<int> centers = {88, 104, 96, 160, 152, 168};
    return centers;
}

/// Picks the shared center that maximizes skipping of the two most significant
/// cells across consecutive layers, among candidates whose worst per-layer
/// clip fraction stays within clip_threshold. The first layer is never shifted.
ShiftPlan select_center(const NetworkModel& network, const ValidatedConfig& config, double clip_threshold = 0.001,
                        const std::vector<int>& centers = default_centers());

/// Evaluates one candidate center without the survival filter.
CenterEvaluation evaluate_center(const NetworkModel& network, const ValidatedConfig& config, int center,
                                 std::vector<LayerShift>* shifts = nullptr);

/// Unshifted score: the same skipping metric select_center maximizes.
double unshifted_score(const NetworkModel& network, const ValidatedConfig& config);

struct CellDeltaMatrix
{
    CrossbarCoord coord;
    int rows = 0;
    int cols = 0;
    std::vector<std::int8_t> delta;  // new - old, row-major
    std::vector<int> max_increase;   // per row
    std::vector<int> max_decrease;   // per row, as a positive pulse count

    std::int8_t at(int r, int c) const { return delta[static_cast<std::size_t>(r) * cols + c]; }
};

/// An old image without an occupant counts as erased (all zeros).
CellDeltaMatrix compute_cell_deltas(const CellImage& old_image, const CellImage& new_image);

/// Same as compute_cell_deltas on raw row-major cell buffers.
CellDeltaMatrix compute_cell_deltas(const std::vector<std::uint8_t>& old_cells, const std::vector<std::uint8_t>& new_cells,
                                    int rows, int cols);

std::uint64_t total_pulses(const CellDeltaMatrix& deltas);

struct DotProduct
{
    std::int64_t accumulation = 0;
    double value = 0.0;
};

/// Dequantized dot product of one output channel with shifted weights, using
/// (w + offset) together with the zero point adjusted to zp_w - offset.
DotProduct compensated_dot_product(std::span<const int> x_q, std::span<const int> w_shifted, int offset,
                                   const QuantParams& qp, int channel = 0);

/// The same dot product on unshifted weights.
DotProduct reference_dot_product(std::span<const int> x_q, std::span<const int> w_q, const QuantParams& qp,
                                 int channel = 0);

}  // namespace aras
