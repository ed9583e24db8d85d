#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "epcrnn/errors.hpp"

namespace ep {

enum class Activation { hard_sigmoid, relu, identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& s);

enum class LayerKind { conv, linear };

struct LayerDesc {
    LayerKind kind = LayerKind::conv;
    int out_channels = 0;  // conv: output channels; linear: output features
    int kernel = 3;
    int stride = 1;
    int pad = 1;
    bool pooled = false;
    int pool_window = 2;  // pool stride == window (VGG-style tiling)
};

// Layered CRNN description. Layer i maps state i-1 (or the input for i=0) to
// state i; conv layers come first, then linear layers, mirroring the
// primitive function's two sums. upsilon holds the 0-based indices of layers
// that receive intermediate learning signals; the output layer is excluded.
struct NetworkSpec {
    std::vector<int> input_shape;  // C,H,W
    std::vector<LayerDesc> layers;
    std::set<int> upsilon;
    Activation conv_act = Activation::hard_sigmoid;
    Activation linear_act = Activation::hard_sigmoid;
    Activation output_act = Activation::hard_sigmoid;
    bool bias_enabled = true;

    int n_total() const { return static_cast<int>(layers.size()); }
    int n_conv() const;
    int n_linear() const { return n_total() - n_conv(); }
    int output_size() const { return layers.back().out_channels; }

    Activation activation_of(int layer) const;

    // Shape of each layer's state for a given batch size; [N,C,H,W] for conv
    // layers, [N,F] for linear layers. Throws if the chain is inconsistent.
    std::vector<std::vector<int>> state_shapes(int batch) const;

    // Flattened input features seen by layer i.
    int fan_in(int layer) const;
    // Flattened size of layer i's state (one sample).
    int state_size(int layer) const;

    void validate() const;

    // Canonical textual form, e.g. "conv:16:3:1:1:pool2,linear:10"; parseable
    // by parse_arch and hashed into the spec digest.
    std::string arch_string() const;
    uint64_t digest() const;
};

NetworkSpec parse_arch(const std::string& arch, const std::vector<int>& input_chw);

}  // namespace ep
