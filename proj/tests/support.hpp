#pragma once

#include "aras/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace aras::test
{

inline std::filesystem::path data_path(const std::string& rel)
{
    return std::filesystem::path(ARAS_DATA_DIR) / rel;
}

/// Small accelerator: pes x 6 rows x 2 cols of 32x32 crossbars.
inline AcceleratorConfig small_params(int pes = 5)
{
    AcceleratorConfig c = default_accelerator_config();
    c.num_pes = pes;
    c.apu_rows_per_pe = 6;
    c.apu_cols_per_pe = 2;
    c.crossbar_rows = 32;
    c.crossbar_cols = 32;
    return c;
}

inline Layer make_layer(int id, LayerKind kind, int k, int cin, int cout, int hw, std::mt19937_64& rng,
                        double mean = 128.0, double stddev = 12.0)
{
    Layer l;
    LayerDescriptor& d = l.desc;
    d.id = id;
    d.kind = kind;
    d.kernel_h = d.kernel_w = kind == LayerKind::FC ? 1 : k;
    d.in_channels = cin;
    d.out_channels = cout;
    d.input_h = d.input_w = kind == LayerKind::FC ? 1 : hw;
    d.padding = kind == LayerKind::FC ? 0 : k / 2;
    d.input_bytes = static_cast<std::uint64_t>(cin) * d.input_h * d.input_w;
    d.output_bytes = static_cast<std::uint64_t>(cout) * d.output_h() * d.output_w();
    l.weights.layer_id = id;
    l.weights.out_channels = cout;
    l.weights.in_channels = cin;
    l.weights.kernel_h = d.kernel_h;
    l.weights.kernel_w = d.kernel_w;
    std::normal_distribution<double> g(mean, stddev);
    l.weights.values.resize(d.weight_count());
    for (auto& v : l.weights.values)
        v = static_cast<std::uint8_t>(std::clamp(std::lround(g(rng)), 0L, 255L));
    return l;
}

/// Mixed CONV/FC network with per-layer Gaussian weights of distinct means.
inline NetworkModel random_network(std::uint64_t seed, int min_layers = 1, int max_layers = 20, double conv_share = 0.6)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> nl(min_layers, max_layers);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> ch(1, 48);
    std::uniform_int_distribution<int> hw(2, 12);
    std::uniform_real_distribution<double> mean(40.0, 215.0);
    std::uniform_real_distribution<double> sd(3.0, 16.0);
    NetworkModel net;
    net.name = "random" + std::to_string(seed);
    const int n = nl(rng);
    for (int i = 0; i < n; ++i)
    {
        const bool conv = u(rng) < conv_share;
        const int k = u(rng) < 0.3 ? 1 : 3;
        if (conv)
            net.layers.push_back(make_layer(i, LayerKind::Conv, k, ch(rng), ch(rng), hw(rng), rng, mean(rng), sd(rng)));
        else
            net.layers.push_back(make_layer(i, LayerKind::FC, 1, ch(rng) * 4, ch(rng) * 2, 1, rng, mean(rng), sd(rng)));
    }
    validate_network(net);
    return net;
}

}  // namespace aras::test
