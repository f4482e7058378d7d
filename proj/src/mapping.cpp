#include "aras/mapping.hpp"

#include <fmt/core.h>

#include <algorithm>

namespace aras
{

namespace
{

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b)
{
    return (a + b - 1) / b;
}

}  // namespace

ResourceRequirement map_layer(const LayerDescriptor& layer, const ValidatedConfig& config)
{
    const AcceleratorConfig& p = config.params();
    ResourceRequirement r;
    r.layer_id = layer.id;
    r.is_conv = layer.kind == LayerKind::Conv;
    r.kernels_per_crossbar = config.kernels_per_crossbar();
    r.vertical_slices = static_cast<int>(ceil_div(layer.unrolled_length(), p.crossbar_rows));
    r.horizontal_slices = static_cast<int>(
        ceil_div(static_cast<std::uint64_t>(layer.out_channels) * config.cells_per_weight(), p.crossbar_cols));
    r.column_groups = static_cast<int>(ceil_div(r.horizontal_slices, p.apu_cols_per_pe));
    r.pe_rows_needed = r.vertical_slices * r.column_groups;
    r.num_windows = r.is_conv ? static_cast<std::uint64_t>(layer.output_h()) * layer.output_w() : 1;
    return r;
}

std::vector<ResourceRequirement> map_network(const NetworkModel& network, const ValidatedConfig& config)
{
    std::vector<ResourceRequirement> out;
    out.reserve(network.layers.size());
    for (const Layer& l : network.layers)
        out.push_back(map_layer(l.desc, config));
    return out;
}

Cycles layer_compute_latency(const ResourceRequirement& req, int replication, const ValidatedConfig& config)
{
    if (replication < 1)
        throw Error(fmt::format("layer {}: replication factor must be at least 1", req.layer_id));
    return ceil_div(req.num_windows, static_cast<std::uint64_t>(replication)) *
           static_cast<Cycles>(config->activation_bits) * config->crossbar_compute_latency;
}

std::vector<int> decompose_weight_to_cells(int w, int weight_bits, int bits_per_cell)
{
    if (bits_per_cell < 1 || weight_bits % bits_per_cell != 0)
        throw Error(fmt::format("{} bits per cell does not divide {}-bit weights", bits_per_cell, weight_bits));
    if (w < 0 || w >= (1 << weight_bits))
        throw Error(fmt::format("weight {} out of range for {} bits", w, weight_bits));
    const int mask = (1 << bits_per_cell) - 1;
    std::vector<int> cells(weight_bits / bits_per_cell);
    for (std::size_t i = 0; i < cells.size(); ++i)
        cells[i] = (w >> (bits_per_cell * i)) & mask;
    return cells;
}

int compose_cells_to_weight(const std::vector<int>& cells, int bits_per_cell)
{
    const int levels = 1 << bits_per_cell;
    int w = 0;
    for (std::size_t i = cells.size(); i-- > 0;)
    {
        if (cells[i] < 0 || cells[i] >= levels)
            throw Error(fmt::format("cell value {} out of range [0, {}]", cells[i], levels - 1));
        w = (w << bits_per_cell) | cells[i];
    }
    return w;
}

void fill_slice_cells(const Layer& layer, const ResourceRequirement& req, int v, int h, const ValidatedConfig& config,
                      std::vector<std::uint8_t>& cells, int offset)
{
    const AcceleratorConfig& p = config.params();
    const int rows = p.crossbar_rows;
    const int cols = p.crossbar_cols;
    cells.assign(static_cast<std::size_t>(rows) * cols, 0);

    const std::uint64_t unrolled = layer.desc.unrolled_length();
    const std::uint64_t u_begin = static_cast<std::uint64_t>(v) * rows;
    const std::uint64_t u_end = std::min<std::uint64_t>(u_begin + rows, unrolled);
    const int k_begin = h * req.kernels_per_crossbar;
    const int k_end = std::min(k_begin + req.kernels_per_crossbar, layer.desc.out_channels);
    const int cpw = config.cells_per_weight();
    const int bpc = p.bits_per_cell;
    const int mask = (1 << bpc) - 1;
    const int max_w = (1 << p.weight_bits) - 1;

    for (int k = k_begin; k < k_end; ++k)
    {
        // Weight (k, c, i, j) sits at k * unrolled + u because u = (c * kh + i) * kw + j.
        const std::uint8_t* src = layer.weights.values.data() + static_cast<std::size_t>(k) * unrolled;
        std::uint8_t* col = cells.data() + static_cast<std::size_t>(k - k_begin) * cpw;
        for (std::uint64_t u = u_begin; u < u_end; ++u)
        {
            int w = src[u];
            if (offset != 0)
                w = std::clamp(w + offset, 0, max_w);
            std::uint8_t* dst = col + (u - u_begin) * cols;
            for (int t = 0; t < cpw; ++t)
                dst[t] = static_cast<std::uint8_t>((w >> (bpc * t)) & mask);
        }
    }
}

std::uint64_t slice_populated_cells(const LayerDescriptor& layer, const ResourceRequirement& req, int v, int h,
                                    const ValidatedConfig& config)
{
    const std::uint64_t rows = static_cast<std::uint64_t>(config->crossbar_rows);
    const std::uint64_t unrolled = layer.unrolled_length();
    const std::uint64_t used_rows = std::min(rows, unrolled - static_cast<std::uint64_t>(v) * rows);
    const int k_begin = h * req.kernels_per_crossbar;
    const int kernels = std::min(req.kernels_per_crossbar, layer.out_channels - k_begin);
    return used_rows * static_cast<std::uint64_t>(kernels) * config.cells_per_weight();
}

std::vector<CellImage> build_cell_images(const Layer& layer, const std::vector<CrossbarCoord>& assignment,
                                         const ValidatedConfig& config)
{
    const ResourceRequirement req = map_layer(layer.desc, config);
    if (assignment.size() < static_cast<std::size_t>(req.crossbars()))
        throw Error(fmt::format("layer {}: assignment has {} crossbars, mapping needs {}", layer.desc.id,
                                assignment.size(), req.crossbars()));
    std::vector<CellImage> images;
    images.reserve(req.crossbars());
    for (int v = 0; v < req.vertical_slices; ++v)
        for (int h = 0; h < req.horizontal_slices; ++h)
        {
            CellImage img(assignment[static_cast<std::size_t>(v) * req.horizontal_slices + h], config->crossbar_rows,
                          config->crossbar_cols);
            img.occupant = layer.desc.id;
            fill_slice_cells(layer, req, v, h, config, img.cells);
            images.push_back(std::move(img));
        }
    return images;
}

QuantizedWeights recover_weights(const Layer& layer, const std::vector<CellImage>& images, const ValidatedConfig& config)
{
    const ResourceRequirement req = map_layer(layer.desc, config);
    if (images.size() != static_cast<std::size_t>(req.crossbars()))
        throw Error(fmt::format("layer {}: expected {} images, got {}", layer.desc.id, req.crossbars(), images.size()));
    QuantizedWeights w = layer.weights;
    const std::uint64_t unrolled = layer.desc.unrolled_length();
    const int rows = config->crossbar_rows;
    const int cpw = config.cells_per_weight();
    std::vector<int> digits(cpw);
    for (int k = 0; k < layer.desc.out_channels; ++k)
    {
        const int h = k / req.kernels_per_crossbar;
        const int col = (k % req.kernels_per_crossbar) * cpw;
        for (std::uint64_t u = 0; u < unrolled; ++u)
        {
            const int v = static_cast<int>(u / rows);
            const CellImage& img = images[static_cast<std::size_t>(v) * req.horizontal_slices + h];
            for (int t = 0; t < cpw; ++t)
                digits[t] = img.at(static_cast<int>(u % rows), col + t);
            w.values[static_cast<std::size_t>(k) * unrolled + u] =
                static_cast<std::uint8_t>(compose_cells_to_weight(digits, config->bits_per_cell));
        }
    }
    return w;
}

}  // namespace aras
