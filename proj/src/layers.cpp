#include "plangen/layers.hpp"

#include "plangen/errors.hpp"

namespace plangen::nn {

void init_uniform(Parameter& p, Rng& rng, double range) {
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
        for (Eigen::Index j = 0; j < p.value.cols(); ++j)
            p.value(i, j) = rng.uniform(-range, range);
}

// ---- Embedding ---------------------------------------------------------------

Embedding::Embedding(const std::string& name, int vocab, int dim, Rng& rng)
    : table(name + ".table", Matrix::Zero(vocab, dim)) {
    init_uniform(table, rng);
}

Var Embedding::lookup(Tape& t, int token_id) {
    if (token_id < 0 || token_id >= vocab())
        throw VocabError("embed_lookup: token id " + std::to_string(token_id) +
                         " outside vocabulary of size " + std::to_string(vocab()));
    return ad::row(t.watch(table), token_id);
}

// ---- Mlp ----------------------------------------------------------------------

Mlp::Mlp(const std::string& name, const std::vector<int>& dims,
         const std::vector<Activation>& acts, Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw ContractError("Mlp: need dims (n+1) and acts (n) for n layers");
    in_dim_ = dims.front();
    out_dim_ = dims.back();
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.w = Parameter(name + ".w" + std::to_string(l), Matrix::Zero(dims[l], dims[l + 1]));
        layer.b = Parameter(name + ".b" + std::to_string(l), Matrix::Zero(1, dims[l + 1]));
        layer.act = acts[l];
        init_uniform(layer.w, rng);
        layers_.push_back(std::move(layer));
    }
}

Var Mlp::apply(Tape& t, Var x) {
    if (x.cols() != in_dim_)
        throw DimensionError("Mlp: input has " + std::to_string(x.cols()) +
                             " features, expected " + std::to_string(in_dim_));
    ++eval_count;
    Var h = x;
    for (auto& layer : layers_) {
        h = ad::add_rowvec(ad::matmul(h, t.watch(layer.w)), t.watch(layer.b));
        switch (layer.act) {
            case Activation::Tanh: h = ad::tanh(h); break;
            case Activation::Sigmoid: h = ad::sigmoid(h); break;
            case Activation::None: break;
        }
    }
    return h;
}

std::vector<Parameter*> Mlp::params() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
        out.push_back(&layer.w);
        out.push_back(&layer.b);
    }
    return out;
}

// ---- GruCell -------------------------------------------------------------------

GruCell::GruCell(const std::string& name, int input_size, int hidden_size, bool layer_norm,
                 Rng& rng)
    : input_size_(input_size), hidden_size_(hidden_size), layer_norm_(layer_norm) {
    auto mat = [&](const std::string& n, int r, int c) {
        Parameter p(name + "." + n, Matrix::Zero(r, c));
        init_uniform(p, rng);
        return p;
    };
    auto vec = [&](const std::string& n) {
        return Parameter(name + "." + n, Matrix::Zero(1, hidden_size));
    };
    wz = mat("wz", input_size, hidden_size);
    uz = mat("uz", hidden_size, hidden_size);
    bz = vec("bz");
    wr = mat("wr", input_size, hidden_size);
    ur = mat("ur", hidden_size, hidden_size);
    br = vec("br");
    wh = mat("wh", input_size, hidden_size);
    uh = mat("uh", hidden_size, hidden_size);
    bh = vec("bh");
    if (layer_norm_) {
        auto ones = [&](const std::string& n) {
            return Parameter(name + "." + n, Matrix::Ones(1, hidden_size));
        };
        ln_gain_z = ones("ln_gain_z");
        ln_bias_z = vec("ln_bias_z");
        ln_gain_r = ones("ln_gain_r");
        ln_bias_r = vec("ln_bias_r");
        ln_gain_h = ones("ln_gain_h");
        ln_bias_h = vec("ln_bias_h");
    }
}

Var GruCell::step(Tape& t, Var x, Var h_prev) {
    if (x.cols() != input_size_ || h_prev.cols() != hidden_size_)
        throw DimensionError("gru_step: got x " + std::to_string(x.cols()) + ", h " +
                             std::to_string(h_prev.cols()) + "; cell expects " +
                             std::to_string(input_size_) + "/" + std::to_string(hidden_size_));

    auto pre = [&](Parameter& w, Parameter& u, Parameter& b, Var hin, Parameter& lg,
                   Parameter& lb) {
        Var p = ad::add_rowvec(
            ad::add(ad::matmul(x, t.watch(w)), ad::matmul(hin, t.watch(u))), t.watch(b));
        if (layer_norm_) p = ad::layer_norm(p, t.watch(lg), t.watch(lb));
        return p;
    };

    Var z = ad::sigmoid(pre(wz, uz, bz, h_prev, ln_gain_z, ln_bias_z));
    Var r = ad::sigmoid(pre(wr, ur, br, h_prev, ln_gain_r, ln_bias_r));
    Var h_cand = ad::tanh(pre(wh, uh, bh, ad::mul(r, h_prev), ln_gain_h, ln_bias_h));
    return ad::add(ad::mul(ad::one_minus(z), h_prev), ad::mul(z, h_cand));
}

std::vector<Parameter*> GruCell::params() {
    std::vector<Parameter*> out = {&wz, &uz, &bz, &wr, &ur, &br, &wh, &uh, &bh};
    if (layer_norm_) {
        out.insert(out.end(), {&ln_gain_z, &ln_bias_z, &ln_gain_r, &ln_bias_r, &ln_gain_h,
                               &ln_bias_h});
    }
    return out;
}

// ---- encoder & output ------------------------------------------------------------

EncoderAnnotations encode_bidirectional(Tape& t, GruCell& fwd, GruCell& bwd,
                                        const std::vector<Var>& embedded_source) {
    if (embedded_source.empty())
        throw ContractError("encode_bidirectional: empty source sequence");
    const int n = static_cast<int>(embedded_source.size());

    std::vector<Var> fstates(n), bstates(n);
    Var h = t.zeros(1, fwd.hidden_size());
    for (int i = 0; i < n; ++i) {
        h = fwd.step(t, embedded_source[static_cast<size_t>(i)], h);
        fstates[static_cast<size_t>(i)] = h;
    }
    h = t.zeros(1, bwd.hidden_size());
    for (int i = n - 1; i >= 0; --i) {
        h = bwd.step(t, embedded_source[static_cast<size_t>(i)], h);
        bstates[static_cast<size_t>(i)] = h;
    }

    std::vector<Var> rows(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        rows[static_cast<size_t>(i)] =
            ad::concat_cols({fstates[static_cast<size_t>(i)], bstates[static_cast<size_t>(i)]});

    EncoderAnnotations out;
    out.matrix = ad::stack_rows(rows);
    out.src_len = n;
    out.dim = fwd.hidden_size() + bwd.hidden_size();
    return out;
}

Var deep_output(Tape& t, Mlp& f_o, Parameter& w_o, Var s_t, Var y_prev, Var psi_t) {
    Var features = f_o.apply(t, ad::concat_cols({s_t, y_prev, psi_t}));
    return ad::log_softmax_rows(ad::matmul(features, t.watch(w_o)));
}

}  // namespace plangen::nn
