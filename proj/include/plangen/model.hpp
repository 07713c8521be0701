#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "plangen/layers.hpp"
#include "plangen/planner.hpp"
#include "plangen/tasks.hpp"

namespace plangen::model {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;
using planner::Mode;

struct ModelConfig {
    int vocab_size = 0;  // shared source/target vocabulary
    int embed_dim = 32;
    int hidden = 64;      // GRU width, encoder (per direction) and decoder
    int att_hidden = 64;  // hidden width of attention/planner MLPs
    int out_hidden = 64;  // deep-output feature width
    int summary_dim = 16;
    int decoder_layers = 1;  // 1 or 2; with 2 the planner reads layer 1
    bool layer_norm = false;
    Mode mode = Mode::Pag;
    int k = 10;
    double lambda_com = 1e-3;
    int max_src_len = 32;
    int pad_id = 0, bos_id = 1, eos_id = 2;

    void validate() const;
    std::map<std::string, std::string> to_kv() const;
    static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

// Encoder, planner, decoder and deep output wired per the configured mode.
class Seq2SeqModel {
public:
    Seq2SeqModel(ModelConfig cfg, uint64_t init_seed);

    ModelConfig config;

    nn::Embedding src_embed, tgt_embed;
    nn::GruCell enc_fwd, enc_bwd;
    std::vector<nn::GruCell> dec;             // decoder_layers cells
    std::vector<Parameter> init_w, init_b;    // decoder initial-state maps
    planner::PlannerParams planner_params;
    nn::Mlp f_o;
    Parameter w_o;  // out_hidden x vocab

    std::vector<Parameter*> parameters();
    long parameter_count();

    // ---- incremental decoding interface ----
    struct DecState {
        std::vector<Var> s;  // per decoder layer
        planner::PlannerState planner;
    };

    struct StepOut {
        Var logp;   // 1 x V log-probabilities
        Var alpha;  // 1 x |X|
        int g = -1;           // commitment switch used this step (-1: baseline)
        bool committed = false;
        Matrix plan_snapshot;  // k x |X| when a PAG commit happened
    };

    nn::EncoderAnnotations encode(Tape& t, const std::vector<int>& source);
    DecState init_decoder(Tape& t, const nn::EncoderAnnotations& ann);
    StepOut decode_step(Tape& t, DecState& state, const nn::EncoderAnnotations& ann,
                        int prev_token, const planner::NoiseFn& noise);

    // ---- training-time forward ----
    struct Forward {
        Var nll;
        std::vector<Var> alphas;
        std::vector<Var> commit_softs;
        std::vector<int> commit_trace;
    };
    Forward forward_nll(Tape& t, const tasks::TaskInstance& inst,
                        const planner::NoiseFn& noise);
};

// nll + commitment penalty (zero for baseline / empty commitments).
Var total_loss(Tape& t, Var nll, const std::vector<Var>& commit_softs, int k, double lambda);

// Global-norm clip over all parameter gradients; returns the applied factor.
double clip_gradients(const std::vector<Parameter*>& params, double threshold);

// Standard Adam with bias correction. Moment slots are keyed by parameter
// name so they can be checkpointed.
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(const std::vector<Parameter*>& params, double lr);

    struct Slot {
        Matrix m, v;
    };
    std::map<std::string, Slot> slots;
    long step_count = 0;
    double beta1, beta2, eps;
};

struct TrainConfig {
    double learning_rate = 2e-4;
    double clip_threshold = 5.0;
    long max_updates = 1000;
    uint64_t seed = 1;
    long eval_interval = 500;  // 0 disables validation
    long log_interval = 50;
    int eval_max_len = 96;
    long checkpoint_interval = 0;       // 0: only on completion
    std::string checkpoint_path;        // empty: no checkpoint files
    std::map<std::string, std::string> checkpoint_extra;

    void validate() const;
};

struct TrainLogRow {
    long update = 0;
    double nll = 0;          // mean over the last log interval
    double penalty = 0;      // mean commitment penalty over the interval
    double valid_acc = -1;   // last known validation accuracy
    double wall = 0;         // seconds since train() started
};

struct TrainResult {
    std::vector<TrainLogRow> rows;
    long updates = 0;
    double best_valid_acc = -1;
    long best_valid_update = -1;
    std::vector<Matrix> best_params;  // snapshot in parameters() order
};

// Shuffled single-instance Adam updates with periodic greedy validation.
// All randomness derives from (config.seed, update index), so resuming from
// `start_update` reproduces an unbroken run bit-for-bit.
TrainResult train(Seq2SeqModel& m, const tasks::Dataset& train_set,
                  const tasks::Dataset* valid_set, const TrainConfig& cfg, Adam& adam,
                  long start_update = 0,
                  const std::function<void(const TrainLogRow&)>& on_log = {},
                  const std::function<bool(long, double)>& should_stop = {});

void restore_params(Seq2SeqModel& m, const std::vector<Matrix>& snapshot);

struct EvalOptions {
    int beam_width = 0;  // 0 or 1: greedy
    int max_len = 96;
    bool length_norm = false;
};

struct EvalResult {
    double exact_match = 0;
    double valid_circuit = -1;  // euler datasets only
    struct Row {
        long id = 0;
        bool exact = false;
        bool circuit_ok = false;
        std::vector<int> predicted;
    };
    std::vector<Row> rows;
};

// Deterministic decoding (zero Gumbel noise); exact sequence match, plus the
// any-valid-circuit metric for euler datasets.
EvalResult evaluate(Seq2SeqModel& m, const tasks::Dataset& data, const EvalOptions& opt);

// ---- checkpointing ----
// Binary container: magic/version, config echo, master seed + update count,
// named float64 tensors, Adam state. Restoring continues training
// bit-identically.
void save_checkpoint(const std::string& path, Seq2SeqModel& m, const Adam& adam,
                     uint64_t seed, uint64_t update,
                     const std::map<std::string, std::string>& extra);

struct LoadedCheckpoint {
    std::unique_ptr<Seq2SeqModel> model;
    Adam adam;
    uint64_t seed = 0;
    uint64_t update = 0;
    std::map<std::string, std::string> extra;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace plangen::model
