#include "plangen/model.hpp"

#include <chrono>
#include <cmath>

#include "plangen/decode.hpp"
#include "plangen/errors.hpp"

namespace plangen::model {

// ---- config -------------------------------------------------------------------

void ModelConfig::validate() const {
    if (vocab_size < 2) throw ConfigError("model: vocab_size must be >= 2");
    if (embed_dim < 1 || hidden < 1 || att_hidden < 1 || out_hidden < 1 || summary_dim < 1)
        throw ConfigError("model: all widths must be positive");
    if (decoder_layers != 1 && decoder_layers != 2)
        throw ConfigError("model: decoder_layers must be 1 or 2");
    if (k < 1) throw ConfigError("model: k must be >= 1");
    if (lambda_com < 0) throw ConfigError("model: lambda_com must be >= 0");
    if (max_src_len < 1) throw ConfigError("model: max_src_len must be >= 1");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
    return {
        {"vocab_size", std::to_string(vocab_size)},
        {"embed_dim", std::to_string(embed_dim)},
        {"hidden", std::to_string(hidden)},
        {"att_hidden", std::to_string(att_hidden)},
        {"out_hidden", std::to_string(out_hidden)},
        {"summary_dim", std::to_string(summary_dim)},
        {"decoder_layers", std::to_string(decoder_layers)},
        {"layer_norm", layer_norm ? "1" : "0"},
        {"mode", planner::to_string(mode)},
        {"k", std::to_string(k)},
        {"lambda_com", std::to_string(lambda_com)},
        {"max_src_len", std::to_string(max_src_len)},
        {"pad_id", std::to_string(pad_id)},
        {"bos_id", std::to_string(bos_id)},
        {"eos_id", std::to_string(eos_id)},
    };
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError(std::string("checkpoint: missing key ") + key);
        return it->second;
    };
    c.vocab_size = std::stoi(get("vocab_size"));
    c.embed_dim = std::stoi(get("embed_dim"));
    c.hidden = std::stoi(get("hidden"));
    c.att_hidden = std::stoi(get("att_hidden"));
    c.out_hidden = std::stoi(get("out_hidden"));
    c.summary_dim = std::stoi(get("summary_dim"));
    c.decoder_layers = std::stoi(get("decoder_layers"));
    c.layer_norm = get("layer_norm") == "1";
    c.mode = planner::mode_from_string(get("mode"));
    c.k = std::stoi(get("k"));
    c.lambda_com = std::stod(get("lambda_com"));
    c.max_src_len = std::stoi(get("max_src_len"));
    c.pad_id = std::stoi(get("pad_id"));
    c.bos_id = std::stoi(get("bos_id"));
    c.eos_id = std::stoi(get("eos_id"));
    return c;
}

// ---- construction ----------------------------------------------------------------

Seq2SeqModel::Seq2SeqModel(ModelConfig cfg, uint64_t init_seed) : config(cfg) {
    config.validate();
    Rng rng(init_seed);
    const int ann_dim = 2 * config.hidden;

    src_embed = nn::Embedding("src_embed", config.vocab_size, config.embed_dim, rng);
    tgt_embed = nn::Embedding("tgt_embed", config.vocab_size, config.embed_dim, rng);
    enc_fwd = nn::GruCell("enc_fwd", config.embed_dim, config.hidden, config.layer_norm, rng);
    enc_bwd = nn::GruCell("enc_bwd", config.embed_dim, config.hidden, config.layer_norm, rng);

    dec.emplace_back("dec0", config.embed_dim + ann_dim, config.hidden, config.layer_norm, rng);
    if (config.decoder_layers == 2)
        dec.emplace_back("dec1", config.hidden, config.hidden, config.layer_norm, rng);
    for (int l = 0; l < config.decoder_layers; ++l) {
        Parameter w("init_w" + std::to_string(l), Matrix::Zero(ann_dim, config.hidden));
        nn::init_uniform(w, rng);
        init_w.push_back(std::move(w));
        init_b.emplace_back("init_b" + std::to_string(l), Matrix::Zero(1, config.hidden));
    }

    using nn::Activation;
    using nn::Mlp;
    auto& pp = planner_params;
    switch (config.mode) {
        case Mode::Baseline:
            pp.f_att = Mlp("f_att", {config.hidden + ann_dim, config.att_hidden, 1},
                           {Activation::Tanh, Activation::None}, rng);
            break;
        case Mode::Pag:
            pp.f_align = Mlp("f_align",
                             {config.hidden + ann_dim + config.summary_dim + config.embed_dim,
                              config.att_hidden, 1},
                             {Activation::Tanh, Activation::None}, rng);
            pp.f_r = Mlp("f_r", {config.max_src_len, config.summary_dim}, {Activation::Tanh},
                         rng);
            pp.f_up = Mlp("f_up", {ann_dim + config.hidden, config.att_hidden, 1},
                          {Activation::Tanh, Activation::Sigmoid}, rng);
            pp.f_c = Mlp("f_c", {config.hidden, config.k}, {Activation::None}, rng);
            break;
        case Mode::Rpag:
            pp.f_align = Mlp("f_align", {config.hidden + ann_dim + config.embed_dim,
                                         config.att_hidden, 1},
                             {Activation::Tanh, Activation::None}, rng);
            pp.f_c = Mlp("f_c", {config.hidden + ann_dim, config.k}, {Activation::None}, rng);
            break;
    }
    if (config.mode != Mode::Baseline) {
        // softplus(raw) + 0.1 == 1.0 initially
        double raw0 = std::log(std::exp(0.9) - 1.0);
        pp.temp_raw = Parameter("temp_raw", Matrix::Constant(1, 1, raw0));
    }

    f_o = nn::Mlp("f_o", {config.hidden + config.embed_dim + ann_dim, config.out_hidden},
                  {Activation::Tanh}, rng);
    w_o = Parameter("w_o", Matrix::Zero(config.out_hidden, config.vocab_size));
    nn::init_uniform(w_o, rng);
}

std::vector<Parameter*> Seq2SeqModel::parameters() {
    std::vector<Parameter*> out;
    auto append = [&](std::vector<Parameter*> ps) {
        out.insert(out.end(), ps.begin(), ps.end());
    };
    out.push_back(&src_embed.table);
    out.push_back(&tgt_embed.table);
    append(enc_fwd.params());
    append(enc_bwd.params());
    for (auto& cell : dec) append(cell.params());
    for (auto& p : init_w) out.push_back(&p);
    for (auto& p : init_b) out.push_back(&p);
    append(planner_params.params(config.mode));
    append(f_o.params());
    out.push_back(&w_o);
    return out;
}

long Seq2SeqModel::parameter_count() {
    long n = 0;
    for (Parameter* p : parameters()) n += static_cast<long>(p->value.size());
    return n;
}

// ---- forward ----------------------------------------------------------------------

nn::EncoderAnnotations Seq2SeqModel::encode(Tape& t, const std::vector<int>& source) {
    if (source.empty()) throw ContractError("encode: empty source");
    if (config.mode == Mode::Pag &&
        static_cast<int>(source.size()) > config.max_src_len)
        throw ConfigError("encode: source length " + std::to_string(source.size()) +
                          " exceeds configured max_src_len " +
                          std::to_string(config.max_src_len));
    std::vector<Var> embedded;
    embedded.reserve(source.size());
    for (int tok : source) embedded.push_back(src_embed.lookup(t, tok));
    return nn::encode_bidirectional(t, enc_fwd, enc_bwd, embedded);
}

Seq2SeqModel::DecState Seq2SeqModel::init_decoder(Tape& t, const nn::EncoderAnnotations& ann) {
    DecState st;
    // mean annotation -> tanh(linear) per decoder layer
    Var mean_row = t.constant(Matrix::Constant(1, ann.src_len, 1.0 / ann.src_len));
    Var mean_ann = ad::matmul(mean_row, ann.matrix);
    for (int l = 0; l < config.decoder_layers; ++l) {
        st.s.push_back(ad::tanh(ad::add_rowvec(
            ad::matmul(mean_ann, t.watch(init_w[static_cast<size_t>(l)])),
            t.watch(init_b[static_cast<size_t>(l)]))));
    }
    switch (config.mode) {
        case Mode::Baseline: break;
        case Mode::Pag: st.planner = planner::init_plans(t, config.k, ann.src_len); break;
        case Mode::Rpag:
            st.planner = planner::init_repeat_state(t, config.k, ann.src_len, ann.dim);
            break;
    }
    return st;
}

Seq2SeqModel::StepOut Seq2SeqModel::decode_step(Tape& t, DecState& state,
                                                const nn::EncoderAnnotations& ann,
                                                int prev_token,
                                                const planner::NoiseFn& noise) {
    StepOut out;
    Var y = tgt_embed.lookup(t, prev_token);

    // Planner conditions on the first decoder layer; the baseline attention
    // MLP conditions on the top layer.
    Var planner_s = state.s.front();
    Var top_s = state.s.back();
    switch (config.mode) {
        case Mode::Baseline:
            out.alpha = planner::baseline_attention(t, planner_params.f_att, top_s, ann);
            break;
        case Mode::Pag: {
            out.g = state.planner.commitment.switch_on() ? 1 : 0;
            out.committed = out.g == 1;
            out.alpha = planner::pag_step(t, state.planner, planner_s, ann, y,
                                          planner_params, noise);
            if (out.committed) out.plan_snapshot = state.planner.plan.value();
            break;
        }
        case Mode::Rpag: {
            out.g = state.planner.commitment.switch_on() ? 1 : 0;
            out.committed = out.g == 1;
            out.alpha = planner::rpag_step(t, state.planner, planner_s, ann, y,
                                           planner_params, noise);
            break;
        }
    }

    Var psi = ad::matmul(out.alpha, ann.matrix);
    if (config.mode == Mode::Rpag) state.planner.psi_prev = psi;

    Var x0 = ad::concat_cols({y, psi});
    state.s[0] = dec[0].step(t, x0, state.s[0]);
    if (config.decoder_layers == 2) state.s[1] = dec[1].step(t, state.s[0], state.s[1]);

    out.logp = nn::deep_output(t, f_o, w_o, state.s.back(), y, psi);
    return out;
}

Seq2SeqModel::Forward Seq2SeqModel::forward_nll(Tape& t, const tasks::TaskInstance& inst,
                                                const planner::NoiseFn& noise) {
    if (inst.target.empty()) throw ContractError("forward_nll: empty target");

    Forward fwd;
    nn::EncoderAnnotations ann = encode(t, inst.source);
    DecState state = init_decoder(t, ann);

    Var total = t.scalar(0.0);
    const int T = static_cast<int>(inst.target.size());
    for (int step = 0; step < T; ++step) {
        int prev = step == 0 ? config.bos_id : inst.target[static_cast<size_t>(step - 1)];
        StepOut s = decode_step(t, state, ann, prev, noise);
        int tgt = inst.target[static_cast<size_t>(step)];
        if (tgt < 0 || tgt >= config.vocab_size)
            throw VocabError("forward_nll: target token " + std::to_string(tgt) +
                             " outside vocabulary");
        total = ad::add(total, ad::scale(ad::entry(s.logp, 0, tgt), -1.0));
        fwd.alphas.push_back(s.alpha);
        if (config.mode != Mode::Baseline) {
            fwd.commit_softs.push_back(state.planner.commitment.soft);
            fwd.commit_trace.push_back(s.g);
        }
    }
    fwd.nll = ad::scale(total, 1.0 / T);
    return fwd;
}

Var total_loss(Tape& t, Var nll, const std::vector<Var>& commit_softs, int k, double lambda) {
    if (commit_softs.empty() || lambda == 0.0) return nll;
    return ad::add(nll, planner::commitment_penalty(t, commit_softs, k, lambda));
}

// ---- optimisation ------------------------------------------------------------------

double clip_gradients(const std::vector<Parameter*>& params, double threshold) {
    double sq = 0.0;
    for (Parameter* p : params) sq += p->grad.squaredNorm();
    double norm = std::sqrt(sq);
    if (norm <= threshold || norm == 0.0) return 1.0;
    double factor = threshold / norm;
    for (Parameter* p : params) p->grad *= factor;
    return factor;
}

Adam::Adam(double b1, double b2, double e) : beta1(b1), beta2(b2), eps(e) {}

void Adam::step(const std::vector<Parameter*>& params, double lr) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (Parameter* p : params) {
        Slot& slot = slots[p->name];
        if (slot.m.size() == 0) {
            slot.m = Matrix::Zero(p->value.rows(), p->value.cols());
            slot.v = Matrix::Zero(p->value.rows(), p->value.cols());
        }
        slot.m = beta1 * slot.m + (1.0 - beta1) * p->grad;
        slot.v = (beta2 * slot.v.array() + (1.0 - beta2) * p->grad.array().square()).matrix();
        p->value.array() -=
            lr * (slot.m.array() / bc1) / ((slot.v.array() / bc2).sqrt() + eps);
    }
}

// ---- training -----------------------------------------------------------------------

void TrainConfig::validate() const {
    if (learning_rate <= 0) throw ConfigError("train: learning_rate must be > 0");
    if (clip_threshold <= 0) throw ConfigError("train: clip_threshold must be > 0");
    if (max_updates < 1) throw ConfigError("train: max_updates must be >= 1");
    if (log_interval < 1) throw ConfigError("train: log_interval must be >= 1");
}

void restore_params(Seq2SeqModel& m, const std::vector<Matrix>& snapshot) {
    auto params = m.parameters();
    if (snapshot.size() != params.size())
        throw ContractError("restore_params: snapshot size mismatch");
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = snapshot[i];
}

TrainResult train(Seq2SeqModel& m, const tasks::Dataset& train_set,
                  const tasks::Dataset* valid_set, const TrainConfig& cfg, Adam& adam,
                  long start_update, const std::function<void(const TrainLogRow&)>& on_log,
                  const std::function<bool(long, double)>& should_stop) {
    cfg.validate();
    if (train_set.instances.empty()) throw ConfigError("train: dataset is empty");

    auto params = m.parameters();
    const size_t n = train_set.size();
    TrainResult result;
    auto t0 = std::chrono::steady_clock::now();

    double interval_nll = 0.0, interval_pen = 0.0;
    long interval_count = 0;
    double last_valid = -1.0;

    std::vector<size_t> order(n);
    long cached_epoch = -1;
    auto epoch_order = [&](long epoch) {
        if (epoch == cached_epoch) return;
        for (size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(cfg.seed ^ 0x8badf00dULL, static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        cached_epoch = epoch;
    };

    for (long update = start_update; update < cfg.max_updates; ++update) {
        const long epoch = update / static_cast<long>(n);
        epoch_order(epoch);
        const size_t idx = order[static_cast<size_t>(update) % n];
        const tasks::TaskInstance& inst = train_set.instances[idx];

        auto noise_rng = std::make_shared<Rng>(
            derive_seed(cfg.seed ^ 0x6d0c0ffeULL, static_cast<uint64_t>(update)));
        planner::NoiseFn noise = planner::seeded_noise(noise_rng);

        for (Parameter* p : params) p->zero_grad();
        Tape tape;
        auto fwd = m.forward_nll(tape, inst, noise);
        Var loss = total_loss(tape, fwd.nll, fwd.commit_softs, m.config.k,
                              m.config.lambda_com);

        const double loss_v = loss.value()(0, 0);
        if (!std::isfinite(loss_v))
            throw NumericError("non-finite loss at update " + std::to_string(update) +
                               ", instance id " + std::to_string(inst.id));
        const double nll_v = fwd.nll.value()(0, 0);

        tape.backward(loss);
        clip_gradients(params, cfg.clip_threshold);
        adam.step(params, cfg.learning_rate);

        interval_nll += nll_v;
        interval_pen += loss_v - nll_v;
        ++interval_count;
        result.updates = update + 1;

        const bool at_log = (update + 1) % cfg.log_interval == 0 ||
                            update + 1 == cfg.max_updates;
        const bool at_eval = valid_set && cfg.eval_interval > 0 &&
                             ((update + 1) % cfg.eval_interval == 0 ||
                              update + 1 == cfg.max_updates);

        if (at_eval) {
            EvalOptions eopt;
            eopt.max_len = cfg.eval_max_len;
            last_valid = evaluate(m, *valid_set, eopt).exact_match;
            if (last_valid > result.best_valid_acc) {
                result.best_valid_acc = last_valid;
                result.best_valid_update = update + 1;
                result.best_params.clear();
                for (Parameter* p : params) result.best_params.push_back(p->value);
            }
        }
        if (at_log) {
            TrainLogRow row;
            row.update = update + 1;
            row.nll = interval_nll / interval_count;
            row.penalty = interval_pen / interval_count;
            row.valid_acc = last_valid;
            row.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                           .count();
            result.rows.push_back(row);
            if (on_log) on_log(row);
            interval_nll = interval_pen = 0.0;
            interval_count = 0;
        }
        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_interval > 0 &&
            (update + 1) % cfg.checkpoint_interval == 0)
            save_checkpoint(cfg.checkpoint_path, m, adam, cfg.seed,
                            static_cast<uint64_t>(update + 1), cfg.checkpoint_extra);
        if (should_stop && should_stop(update + 1, last_valid)) break;
    }

    if (!cfg.checkpoint_path.empty())
        save_checkpoint(cfg.checkpoint_path, m, adam, cfg.seed,
                        static_cast<uint64_t>(result.updates), cfg.checkpoint_extra);
    return result;
}

// ---- evaluation ---------------------------------------------------------------------

EvalResult evaluate(Seq2SeqModel& m, const tasks::Dataset& data, const EvalOptions& opt) {
    EvalResult res;
    if (data.instances.empty()) return res;

    const bool euler = data.task == "euler";
    long exact = 0, circuits = 0;
    for (const auto& inst : data.instances) {
        decode::DecodeTrace trace =
            opt.beam_width > 1
                ? decode::beam_search(m, inst.source, opt.beam_width, opt.max_len,
                                      opt.length_norm)
                : decode::greedy_decode(m, inst.source, opt.max_len);

        EvalResult::Row row;
        row.id = inst.id;
        row.predicted = trace.tokens;
        row.exact = trace.tokens == inst.target;
        exact += row.exact;

        if (euler) {
            tasks::Graph g;
            int start = 0;
            if (tasks::parse_euler_source(data.vocab, inst.source, &g, &start)) {
                std::vector<int> walk;
                bool ok = !trace.tokens.empty() && trace.tokens.back() == data.vocab.eos;
                if (ok) {
                    for (size_t i = 0; i + 1 < trace.tokens.size(); ++i) {
                        const std::string& name = data.vocab.name(trace.tokens[i]);
                        try {
                            walk.push_back(std::stoi(name));
                        } catch (...) {
                            ok = false;
                            break;
                        }
                    }
                }
                row.circuit_ok = ok && tasks::is_eulerian_circuit(g, start, walk);
                circuits += row.circuit_ok;
            }
        }
        res.rows.push_back(std::move(row));
    }
    res.exact_match = static_cast<double>(exact) / static_cast<double>(data.size());
    if (euler) res.valid_circuit = static_cast<double>(circuits) / static_cast<double>(data.size());
    return res;
}

}  // namespace plangen::model
