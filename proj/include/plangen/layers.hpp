#pragma once

#include <string>
#include <vector>

#include "plangen/rng.hpp"
#include "plangen/tape.hpp"

namespace plangen::nn {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

// Uniform(-range, range) weights; the conventional small-uniform recurrent init.
void init_uniform(Parameter& p, Rng& rng, double range = 0.08);

enum class Activation { None, Tanh, Sigmoid };

// Token embedding table, one row per id.
struct Embedding {
    Parameter table;  // V x d

    Embedding() = default;
    Embedding(const std::string& name, int vocab, int dim, Rng& rng);

    Var lookup(Tape& t, int token_id);
    int vocab() const { return static_cast<int>(table.value.rows()); }
    int dim() const { return static_cast<int>(table.value.cols()); }
};

// Plain fully connected stack; applies row-wise to m x d_in inputs.
class Mlp {
public:
    Mlp() = default;
    Mlp(const std::string& name, const std::vector<int>& dims,
        const std::vector<Activation>& acts, Rng& rng);

    Var apply(Tape& t, Var x);
    std::vector<Parameter*> params();

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }

    // Bias of the final layer; tests use it to force saturated gates.
    Parameter& final_bias() { return layers_.back().b; }

    long eval_count = 0;  // forward applications, for call-count properties

private:
    struct Layer {
        Parameter w, b;
        Activation act = Activation::None;
    };
    std::vector<Layer> layers_;
    int in_dim_ = 0, out_dim_ = 0;
};

// Gated recurrent unit; update gate z, reset gate r, candidate state.
// With layer_norm enabled, each of the three pre-activations is normalised
// with its own gain/bias before the nonlinearity.
class GruCell {
public:
    GruCell() = default;
    GruCell(const std::string& name, int input_size, int hidden_size, bool layer_norm,
            Rng& rng);

    // h' = (1 - z) .* h_prev + z .* tanh(candidate)
    Var step(Tape& t, Var x, Var h_prev);
    std::vector<Parameter*> params();

    int input_size() const { return input_size_; }
    int hidden_size() const { return hidden_size_; }
    bool layer_norm_enabled() const { return layer_norm_; }

    Parameter wz, uz, bz;
    Parameter wr, ur, br;
    Parameter wh, uh, bh;
    Parameter ln_gain_z, ln_bias_z, ln_gain_r, ln_bias_r, ln_gain_h, ln_bias_h;

private:
    int input_size_ = 0, hidden_size_ = 0;
    bool layer_norm_ = false;
};

// Annotation matrix H: row i is [h_i_forward ; h_i_backward] for source
// position i.
struct EncoderAnnotations {
    Var matrix;  // |X| x (2 * encoder_hidden)
    int src_len = 0;
    int dim = 0;
};

// Runs `fwd` left-to-right and `bwd` right-to-left over the embedded source
// (zero initial states) and concatenates per-position states.
EncoderAnnotations encode_bidirectional(Tape& t, GruCell& fwd, GruCell& bwd,
                                        const std::vector<Var>& embedded_source);

// Deep output: log softmax of W_o * f_o([s_t, y_prev, psi_t]).
Var deep_output(Tape& t, Mlp& f_o, Parameter& w_o, Var s_t, Var y_prev, Var psi_t);

}  // namespace plangen::nn
