// plangen: dataset generation, training, evaluation, and alignment dumps
// for planning-augmented sequence-to-sequence models.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "plangen/decode.hpp"
#include "plangen/errors.hpp"
#include "plangen/model.hpp"
#include "plangen/tasks.hpp"
#include "plangen/viz.hpp"

namespace fs = std::filesystem;
using namespace plangen;

namespace {

struct GenArgs {
    std::string task = "euler";
    int nodes = 7;
    int vocab = 8;
    int min_len = 3, max_len = 10;
    int count = 1000;
    uint64_t seed = 1;
    std::string out;
    double train_frac = 0.8, valid_frac = 0.1, test_frac = 0.1;
};

int run_gen(const GenArgs& a) {
    if (a.task == "euler" && a.nodes < 3) throw ConfigError("n >= 3 required");
    tasks::Dataset all;
    if (a.task == "euler") {
        all = tasks::gen_euler_dataset(a.nodes, a.count, a.seed);
    } else if (a.task == "copy" || a.task == "reverse") {
        all = tasks::gen_copy_dataset(a.vocab, a.min_len, a.max_len, a.count,
                                      a.task == "reverse", a.seed);
    } else {
        throw ConfigError("unknown task '" + a.task + "' (expected euler|copy|reverse)");
    }

    tasks::SplitFractions f{a.train_frac, a.valid_frac, a.test_frac};
    auto splits = a.task == "euler" ? tasks::split_euler_dataset(all, f, a.seed + 1)
                                    : tasks::split_dataset(all, f, a.seed + 1);

    fs::create_directories(a.out);
    const char* names[3] = {"train.txt", "valid.txt", "test.txt"};
    for (int i = 0; i < 3; ++i) {
        tasks::save_dataset(a.out + "/" + names[i], splits[static_cast<size_t>(i)]);
        std::cout << names[i] << ": " << splits[static_cast<size_t>(i)].size()
                  << " instances\n";
    }
    std::cout << "vocab size " << all.vocab.size() << ", max source length "
              << all.max_src_len << "\n";
    return 0;
}

struct TrainArgs {
    std::string train_path, valid_path;
    std::string mode = "pag";
    int hidden = 64, embed = 32, att_hidden = 64, out_hidden = 64, summary_dim = 16;
    int decoder_layers = 1;
    bool layer_norm = false;
    int k = 10;
    double lambda_com = 1e-3;
    double lr = 2e-4, clip = 5.0;
    long updates = 20000;
    uint64_t seed = 1;
    long eval_interval = 500, log_interval = 50, checkpoint_interval = 0;
    int eval_max_len = 96;
    double stop_valid_acc = -1.0;
    std::string checkpoint, metrics, resume;
};

std::map<std::string, std::string> dataset_extra(const tasks::Dataset& d) {
    std::string vocab;
    for (int i = 0; i < d.vocab.size(); ++i)
        vocab += (i ? "," : "") + d.vocab.tokens[static_cast<size_t>(i)];
    return {{"task", d.task}, {"vocab", vocab}};
}

void check_vocab(const model::LoadedCheckpoint& ckpt, const tasks::Dataset& d) {
    auto it = ckpt.extra.find("vocab");
    if (it == ckpt.extra.end()) return;
    std::string vocab;
    for (int i = 0; i < d.vocab.size(); ++i)
        vocab += (i ? "," : "") + d.vocab.tokens[static_cast<size_t>(i)];
    if (vocab != it->second)
        throw ConfigError("vocabulary mismatch between checkpoint and dataset");
}

int run_train(const TrainArgs& a) {
    tasks::Dataset train_set = tasks::load_dataset(a.train_path);
    tasks::Dataset valid_set;
    bool has_valid = !a.valid_path.empty();
    if (has_valid) valid_set = tasks::load_dataset(a.valid_path);

    std::unique_ptr<model::Seq2SeqModel> m;
    model::Adam adam;
    uint64_t seed = a.seed;
    long start_update = 0;

    if (!a.resume.empty()) {
        auto ckpt = model::load_checkpoint(a.resume);
        check_vocab(ckpt, train_set);
        m = std::move(ckpt.model);
        adam = std::move(ckpt.adam);
        seed = ckpt.seed;
        start_update = static_cast<long>(ckpt.update);
        std::cout << "resumed from " << a.resume << " at update " << start_update << "\n";
    } else {
        model::ModelConfig cfg;
        cfg.vocab_size = train_set.vocab.size();
        cfg.embed_dim = a.embed;
        cfg.hidden = a.hidden;
        cfg.att_hidden = a.att_hidden;
        cfg.out_hidden = a.out_hidden;
        cfg.summary_dim = a.summary_dim;
        cfg.decoder_layers = a.decoder_layers;
        cfg.layer_norm = a.layer_norm;
        cfg.mode = planner::mode_from_string(a.mode);
        cfg.k = a.k;
        cfg.lambda_com = a.lambda_com;
        cfg.max_src_len = train_set.max_src_len;
        m = std::make_unique<model::Seq2SeqModel>(cfg, seed);
    }

    model::TrainConfig tc;
    tc.learning_rate = a.lr;
    tc.clip_threshold = a.clip;
    tc.max_updates = a.updates;
    tc.seed = seed;
    tc.eval_interval = has_valid ? a.eval_interval : 0;
    tc.log_interval = a.log_interval;
    tc.eval_max_len = a.eval_max_len;
    tc.checkpoint_path = a.checkpoint;
    tc.checkpoint_interval = a.checkpoint_interval;
    tc.checkpoint_extra = dataset_extra(train_set);

    std::ofstream metrics;
    if (!a.metrics.empty()) {
        bool append = start_update > 0 && fs::exists(a.metrics);
        metrics.open(a.metrics, append ? std::ios::app : std::ios::out);
        if (!metrics) throw ConfigError("cannot write metrics file '" + a.metrics + "'");
        if (!append) metrics << "update,nll,commit_penalty,valid_accuracy,wall_time\n";
    }

    auto on_log = [&](const model::TrainLogRow& row) {
        if (metrics.is_open()) {
            metrics << row.update << "," << row.nll << "," << row.penalty << ","
                    << row.valid_acc << "," << row.wall << "\n";
            metrics.flush();
        }
        std::cout << "update " << row.update << " nll " << row.nll << " penalty "
                  << row.penalty << " valid_acc " << row.valid_acc << "\n";
    };
    auto should_stop = [&](long, double acc) {
        return a.stop_valid_acc > 0 && acc >= a.stop_valid_acc;
    };

    auto result = model::train(*m, train_set, has_valid ? &valid_set : nullptr, tc, adam,
                               start_update, on_log, should_stop);
    std::cout << "done: " << result.updates << " updates, best valid accuracy "
              << result.best_valid_acc << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint, data, out;
    int beam = 4;
    bool greedy = false;
    int max_len = 96;
    bool length_norm = false;
};

int run_eval(const EvalArgs& a) {
    auto ckpt = model::load_checkpoint(a.checkpoint);
    tasks::Dataset data = tasks::load_dataset(a.data);
    check_vocab(ckpt, data);

    model::EvalOptions opt;
    opt.beam_width = a.greedy ? 0 : a.beam;
    opt.max_len = a.max_len;
    opt.length_norm = a.length_norm;
    auto res = model::evaluate(*ckpt.model, data, opt);

    std::cout << "exact_match " << res.exact_match << "\n";
    if (res.valid_circuit >= 0) std::cout << "valid_circuit " << res.valid_circuit << "\n";

    if (!a.out.empty()) {
        std::ofstream os(a.out);
        if (!os) throw ConfigError("cannot write results file '" + a.out + "'");
        for (const auto& row : res.rows) {
            os << row.id << "\t";
            for (size_t i = 0; i < row.predicted.size(); ++i)
                os << (i ? " " : "") << data.vocab.name(row.predicted[i]);
            os << "\t" << (row.exact ? 1 : 0) << "\t" << (row.circuit_ok ? 1 : 0) << "\n";
        }
    }
    return 0;
}

struct DumpArgs {
    std::string checkpoint, data, out;
    std::string instances = "0";
    int max_len = 96;
};

std::vector<size_t> parse_selector(const std::string& sel, size_t dataset_size) {
    std::vector<size_t> out;
    std::istringstream ss(sel);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        if (piece.empty()) continue;
        auto dash = piece.find('-');
        try {
            if (dash == std::string::npos) {
                out.push_back(std::stoul(piece));
            } else {
                size_t lo = std::stoul(piece.substr(0, dash));
                size_t hi = std::stoul(piece.substr(dash + 1));
                for (size_t i = lo; i <= hi; ++i) out.push_back(i);
            }
        } catch (const std::exception&) {
            throw ConfigError("bad instance selector piece '" + piece + "'");
        }
    }
    std::erase_if(out, [&](size_t i) { return i >= dataset_size; });
    if (out.empty()) throw ConfigError("instance selector matches nothing");
    return out;
}

int run_dump(const DumpArgs& a) {
    auto ckpt = model::load_checkpoint(a.checkpoint);
    tasks::Dataset data = tasks::load_dataset(a.data);
    check_vocab(ckpt, data);
    auto indices = parse_selector(a.instances, data.size());
    auto result = viz::dump_alignments(*ckpt.model, data, indices, a.out, a.max_len);
    std::cout << "wrote " << result.files.size() << " files for " << result.instances
              << " instances to " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plangen: planning-augmented sequence-to-sequence toolkit"};
    app.require_subcommand(1);

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "Generate train/valid/test dataset files");
    gen->add_option("--task", ga.task, "euler|copy|reverse")->capture_default_str();
    gen->add_option("--nodes", ga.nodes, "Graph size for euler")->capture_default_str();
    gen->add_option("--vocab", ga.vocab, "Symbol count for copy/reverse")
        ->capture_default_str();
    gen->add_option("--min-len", ga.min_len)->capture_default_str();
    gen->add_option("--max-len", ga.max_len)->capture_default_str();
    gen->add_option("--count", ga.count)->capture_default_str();
    gen->add_option("--seed", ga.seed)->capture_default_str();
    gen->add_option("--out", ga.out, "Output directory")->required();
    gen->add_option("--train-frac", ga.train_frac)->capture_default_str();
    gen->add_option("--valid-frac", ga.valid_frac)->capture_default_str();
    gen->add_option("--test-frac", ga.test_frac)->capture_default_str();

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train a model");
    train->set_config("--config", "", "Config file (key=value lines, # comments)");
    train->add_option("--train", ta.train_path, "Training dataset file")->required();
    train->add_option("--valid", ta.valid_path, "Validation dataset file");
    train->add_option("--mode", ta.mode, "baseline|pag|rpag")->capture_default_str();
    train->add_option("--hidden", ta.hidden)->capture_default_str();
    train->add_option("--embed", ta.embed)->capture_default_str();
    train->add_option("--att-hidden", ta.att_hidden)->capture_default_str();
    train->add_option("--out-hidden", ta.out_hidden)->capture_default_str();
    train->add_option("--summary-dim", ta.summary_dim)->capture_default_str();
    train->add_option("--decoder-layers", ta.decoder_layers)->capture_default_str();
    train->add_flag("--layer-norm", ta.layer_norm, "Layer norm on GRU pre-activations");
    train->add_option("--k", ta.k, "Planning horizon")->capture_default_str();
    train->add_option("--lambda-com", ta.lambda_com)->capture_default_str();
    train->add_option("--lr", ta.lr)->capture_default_str();
    train->add_option("--clip", ta.clip)->capture_default_str();
    train->add_option("--updates", ta.updates)->capture_default_str();
    train->add_option("--seed", ta.seed)->capture_default_str();
    train->add_option("--eval-interval", ta.eval_interval)->capture_default_str();
    train->add_option("--log-interval", ta.log_interval)->capture_default_str();
    train->add_option("--eval-max-len", ta.eval_max_len)->capture_default_str();
    train->add_option("--checkpoint", ta.checkpoint, "Checkpoint output path");
    train->add_option("--checkpoint-interval", ta.checkpoint_interval)
        ->capture_default_str();
    train->add_option("--metrics", ta.metrics, "Metrics CSV output path");
    train->add_option("--resume", ta.resume, "Checkpoint to resume from");
    train->add_option("--stop-valid-acc", ta.stop_valid_acc,
                      "Stop once validation accuracy reaches this value");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval->add_option("--checkpoint", ea.checkpoint)->required();
    eval->add_option("--data", ea.data)->required();
    eval->add_option("--beam", ea.beam, "Beam width")->capture_default_str();
    eval->add_flag("--greedy", ea.greedy, "Greedy decoding (overrides --beam)");
    eval->add_option("--max-len", ea.max_len)->capture_default_str();
    eval->add_flag("--length-norm", ea.length_norm);
    eval->add_option("--out", ea.out, "Per-instance results file");

    DumpArgs da;
    auto* dump = app.add_subcommand("dump", "Export alignment heatmaps for instances");
    dump->add_option("--checkpoint", da.checkpoint)->required();
    dump->add_option("--data", da.data)->required();
    dump->add_option("--instances", da.instances, "e.g. 0,1,4 or 0-7")
        ->capture_default_str();
    dump->add_option("--out", da.out, "Output directory")->required();
    dump->add_option("--max-len", da.max_len)->capture_default_str();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return run_gen(ga);
        if (train->parsed()) return run_train(ta);
        if (eval->parsed()) return run_eval(ea);
        if (dump->parsed()) return run_dump(da);
        return 2;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
