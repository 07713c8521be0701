#include "plangen/viz.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "plangen/decode.hpp"
#include "plangen/errors.hpp"

namespace plangen::viz {

void write_heatmap_pgm(const std::string& path, const ad::Matrix& alpha) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write heatmap '" + path + "'");
    os << "P2\n" << alpha.cols() << " " << alpha.rows() << "\n255\n";
    for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
        for (Eigen::Index j = 0; j < alpha.cols(); ++j) {
            double a = std::min(1.0, std::max(0.0, alpha(i, j)));
            int grey = static_cast<int>(std::lround(255.0 * (1.0 - a)));
            os << grey << (j + 1 == alpha.cols() ? "" : " ");
        }
        os << "\n";
    }
}

void write_alignment_csv(const std::string& path, const ad::Matrix& alphas,
                         const std::vector<std::string>& source_tokens,
                         const std::vector<std::string>& target_tokens) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write alignment csv '" + path + "'");
    os << "";
    for (const auto& tok : source_tokens) os << "," << tok;
    os << "\n";
    for (Eigen::Index i = 0; i < alphas.rows(); ++i) {
        os << (i < static_cast<Eigen::Index>(target_tokens.size())
                   ? target_tokens[static_cast<size_t>(i)]
                   : "?");
        os.precision(12);
        for (Eigen::Index j = 0; j < alphas.cols(); ++j) os << "," << alphas(i, j);
        os << "\n";
    }
}

namespace {

void write_plan_csv(const std::string& path, const ad::Matrix& plan) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write plan csv '" + path + "'");
    os.precision(12);
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
        for (Eigen::Index j = 0; j < plan.cols(); ++j)
            os << plan(i, j) << (j + 1 == plan.cols() ? "" : ",");
        os << "\n";
    }
}

}  // namespace

DumpResult dump_alignments(model::Seq2SeqModel& m, const tasks::Dataset& data,
                           const std::vector<size_t>& indices, const std::string& out_dir,
                           int max_len) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    DumpResult result;
    for (size_t idx : indices) {
        if (idx >= data.size())
            throw ConfigError("dump: instance index " + std::to_string(idx) +
                              " out of range (dataset has " + std::to_string(data.size()) +
                              " instances)");
        const tasks::TaskInstance& inst = data.instances[idx];
        decode::DecodeTrace trace = decode::greedy_decode(m, inst.source, max_len);

        std::vector<std::string> src_names, out_names;
        for (int tok : inst.source) src_names.push_back(data.vocab.name(tok));
        for (int tok : trace.tokens) out_names.push_back(data.vocab.name(tok));

        std::string stem = out_dir + "/instance" + std::to_string(inst.id);
        write_alignment_csv(stem + "_alignment.csv", trace.alphas, src_names, out_names);
        result.files.push_back(stem + "_alignment.csv");
        write_heatmap_pgm(stem + "_alignment.pgm", trace.alphas);
        result.files.push_back(stem + "_alignment.pgm");

        if (!trace.commits.empty()) {
            std::string cpath = stem + "_commits.txt";
            std::ofstream os(cpath);
            for (size_t i = 0; i < trace.commits.size(); ++i)
                os << (i ? " " : "") << trace.commits[i];
            os << "\n";
            result.files.push_back(cpath);
        }
        for (size_t p = 0; p < trace.plans.size(); ++p) {
            std::string ppath =
                stem + "_plan_t" + std::to_string(trace.plan_steps[p]) + ".csv";
            write_plan_csv(ppath, trace.plans[p]);
            result.files.push_back(ppath);
        }
        ++result.instances;
    }
    return result;
}

}  // namespace plangen::viz
