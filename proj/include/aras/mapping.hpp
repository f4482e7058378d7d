#pragma once

#include "aras/model.hpp"

#include <optional>
#include <vector>

namespace aras
{

/// How one copy of a layer's kernel set spreads over crossbars and PE rows.
///
/// A PE row holds one vertical slice and up to apu_cols_per_pe horizontal slices;
/// the layer's PE rows are ordered (vertical slice, column group).
struct ResourceRequirement
{
    int layer_id = 0;
    bool is_conv = true;
    int vertical_slices = 1;
    int horizontal_slices = 1;
    int column_groups = 1;
    int pe_rows_needed = 1;
    std::uint64_t num_windows = 1;
    int kernels_per_crossbar = 1;

    int crossbars() const { return vertical_slices * horizontal_slices; }
};

ResourceRequirement map_layer(const LayerDescriptor& layer, const ValidatedConfig& config);

std::vector<ResourceRequirement> map_network(const NetworkModel& network, const ValidatedConfig& config);

/// ceil(windows / R) * activation_bits * crossbar_compute_latency.
Cycles layer_compute_latency(const ResourceRequirement& req, int replication, const ValidatedConfig& config);

/// Cell slices of w, least significant slice first.
std::vector<int> decompose_weight_to_cells(int w, int weight_bits, int bits_per_cell);
int compose_cells_to_weight(const std::vector<int>& cells, int bits_per_cell);

struct CrossbarCoord
{
    int pe = 0;
    int apu_row = 0;
    int apu_col = 0;

    auto operator<=>(const CrossbarCoord&) const = default;
};

struct CellImage
{
    CrossbarCoord coord;
    int rows = 0;
    int cols = 0;
    std::optional<int> occupant;
    std::vector<std::uint8_t> cells;  // row-major

    CellImage() = default;
    CellImage(CrossbarCoord c, int r, int k) : coord(c), rows(r), cols(k), cells(static_cast<std::size_t>(r) * k, 0) {}

    std::uint8_t at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
};

/// Horizontal slice h of vertical slice v, filled into a crossbar-sized buffer
/// (row-major, crossbar_rows x crossbar_cols). A nonzero offset writes
/// clip(w + offset) instead of w.
void fill_slice_cells(const Layer& layer, const ResourceRequirement& req, int v, int h, const ValidatedConfig& config,
                      std::vector<std::uint8_t>& cells, int offset = 0);

/// Number of weight-bearing cells in slice (v, h).
std::uint64_t slice_populated_cells(const LayerDescriptor& layer, const ResourceRequirement& req, int v, int h,
                                    const ValidatedConfig& config);

/// Images for every slice of the layer. assignment[v * horizontal_slices + h] hosts slice (v, h).
std::vector<CellImage> build_cell_images(const Layer& layer, const std::vector<CrossbarCoord>& assignment,
                                         const ValidatedConfig& config);

/// Reads every weight back out of a layer's images (inverse of build_cell_images).
QuantizedWeights recover_weights(const Layer& layer, const std::vector<CellImage>& images,
                                 const ValidatedConfig& config);

}  // namespace aras
