#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "boxlab/boxlab.hpp"

namespace {

using boxlab::input_error;

struct GlobalOpts {
    std::uint64_t seed = 0;
    bool verbose = false;
};

void vlog(const GlobalOpts& opts, const std::string& message) {
    if (opts.verbose) std::cerr << "boxlab: " << message << '\n';
}

std::string fmt(double value) { return boxlab::detail::format_double(value); }

// ---------------------------------------------------------------------------
// synth: ground-truth hierarchy, triplets, scores, and specificity pairs

struct SynthOpts {
    int depth = 3;
    int branching = 2;
    int dim = 4;
    double shrink = 0.45;
    std::string out_boxes;
    std::string out_triplets;
    std::string triplet_kind = "both";
    int negatives = 3;
    std::string out_scores;
    std::string weak_subtree = "n1";
    double weak_mean = 3.0;
    double strong_mean = 8.0;
    double noise = 0.5;
    std::string out_pairs;
    int pair_count = 50;
};

void run_synth(const GlobalOpts& global, const SynthOpts& opts) {
    boxlab::HierarchySpec spec;
    spec.depth = opts.depth;
    spec.branching = opts.branching;
    spec.dim = opts.dim;
    spec.shrink = opts.shrink;
    spec.seed = global.seed;
    boxlab::GroundTruthTree tree = boxlab::gen_nested_boxes(spec);
    vlog(global, "generated " + std::to_string(tree.nodes.size()) + " boxes, " +
                     std::to_string(tree.leaves().size()) + " leaves");

    boxlab::write_box_table(tree.nodes, opts.out_boxes);

    if (!opts.out_triplets.empty()) {
        std::vector<boxlab::RelationTriplet> triplets;
        auto append = [&](boxlab::RelationKind kind) {
            auto batch = boxlab::gen_triplets(tree, kind, opts.negatives);
            triplets.insert(triplets.end(), batch.begin(), batch.end());
        };
        if (opts.triplet_kind == "both" || opts.triplet_kind == "entailment")
            append(boxlab::RelationKind::entailment);
        if (opts.triplet_kind == "both" || opts.triplet_kind == "similarity")
            append(boxlab::RelationKind::similarity);
        if (opts.triplet_kind != "both" && opts.triplet_kind != "entailment" &&
            opts.triplet_kind != "similarity")
            throw input_error("unknown triplet kind: " + opts.triplet_kind);
        boxlab::write_triplets(triplets, opts.out_triplets);
        vlog(global, "wrote " + std::to_string(triplets.size()) + " triplets");
    }

    if (!opts.out_scores.empty()) {
        boxlab::ScoreTable scores = boxlab::gen_scores(tree, opts.weak_subtree, opts.weak_mean,
                                                       opts.strong_mean, opts.noise, global.seed);
        boxlab::write_scores(scores, opts.out_scores);
    }

    if (!opts.out_pairs.empty()) {
        auto leaves = tree.leaves();
        if (leaves.size() < 2) throw input_error("need at least two leaves for pairs");
        boxlab::Rng rng(global.seed, 13);
        std::vector<boxlab::SpecificityPair> pairs;
        int attempts = 0;
        while (static_cast<int>(pairs.size()) < opts.pair_count && attempts < opts.pair_count * 50) {
            ++attempts;
            std::size_t i = rng.index(leaves.size());
            std::size_t j = rng.index(leaves.size() - 1);
            if (j >= i) ++j;
            double vol_i = boxlab::hard_volume(tree.nodes.at(leaves[i]));
            double vol_j = boxlab::hard_volume(tree.nodes.at(leaves[j]));
            if (vol_i == vol_j) continue;  // no ground truth for equal volumes
            pairs.push_back({leaves[i], leaves[j], vol_i < vol_j ? 'a' : 'b'});
        }
        if (pairs.empty()) throw input_error("could not sample volume-ordered leaf pairs");
        boxlab::write_pairs(pairs, opts.out_pairs);
    }
}

// ---------------------------------------------------------------------------
// fit: train boxes from a triplet file

struct FitOpts {
    std::string triplets_path;
    std::string out_path;
    std::string config_path;
    double holdout = 0.0;
    // flag overrides, applied on top of the JSON config
    int dim = 0;
    int epochs = 0;
    double learning_rate = 0.0;
    int batch_size = 0;
    std::string loss_space;
    double momentum = -1.0;
    double softmax_scale = 0.0;
};

boxlab::FitConfig load_fit_config(const std::string& path) {
    boxlab::FitConfig config;
    if (path.empty()) return config;
    std::ifstream in(path);
    if (!in) throw input_error("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw input_error(path + ": " + e.what());
    }
    if (!doc.is_object()) throw input_error(path + ": config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "dim") config.dim = value.get<int>();
            else if (key == "learning_rate") config.learning_rate = value.get<double>();
            else if (key == "epochs") config.epochs = value.get<int>();
            else if (key == "batch_size") config.batch_size = value.get<int>();
            else if (key == "loss_space")
                config.loss_space = boxlab::loss_space_from_string(value.get<std::string>());
            else if (key == "softmax_scale") config.softmax_scale = value.get<double>();
            else if (key == "momentum") config.momentum = value.get<double>();
            else if (key == "beta_vol") config.gumbel.beta_vol = value.get<double>();
            else if (key == "beta_int") config.gumbel.beta_int = value.get<double>();
            else throw input_error(path + ": unknown config key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw input_error(path + ": bad value for '" + key + "': " + e.what());
        }
    }
    return config;
}

void run_fit(const GlobalOpts& global, const FitOpts& opts, const CLI::App* cmd) {
    boxlab::FitConfig config = load_fit_config(opts.config_path);
    config.seed = global.seed;
    if (cmd->count("--dim")) config.dim = opts.dim;
    if (cmd->count("--epochs")) config.epochs = opts.epochs;
    if (cmd->count("--lr")) config.learning_rate = opts.learning_rate;
    if (cmd->count("--batch")) config.batch_size = opts.batch_size;
    if (cmd->count("--loss-space"))
        config.loss_space = boxlab::loss_space_from_string(opts.loss_space);
    if (cmd->count("--momentum")) config.momentum = opts.momentum;
    if (cmd->count("--scale")) config.softmax_scale = opts.softmax_scale;
    config.validate();

    auto triplets = boxlab::read_triplets(opts.triplets_path);
    if (triplets.empty()) throw input_error("no triplets in " + opts.triplets_path);

    std::vector<boxlab::RelationTriplet> eval;
    if (opts.holdout > 0.0) {
        if (opts.holdout >= 1.0) throw input_error("holdout fraction must be below 1");
        boxlab::Rng rng(global.seed, 14);
        rng.shuffle(triplets);
        std::size_t keep = triplets.size() -
                           static_cast<std::size_t>(opts.holdout *
                                                    static_cast<double>(triplets.size()));
        if (keep == 0) throw input_error("holdout leaves no training triplets");
        eval.assign(triplets.begin() + static_cast<std::ptrdiff_t>(keep), triplets.end());
        triplets.resize(keep);
    }

    std::set<std::string> id_set;
    for (const auto& t : triplets) {
        id_set.insert(t.anchor);
        id_set.insert(t.positive);
        id_set.insert(t.negatives.begin(), t.negatives.end());
    }
    for (const auto& t : eval) {
        id_set.insert(t.anchor);
        id_set.insert(t.positive);
        id_set.insert(t.negatives.begin(), t.negatives.end());
    }
    std::vector<std::string> ids(id_set.begin(), id_set.end());
    boxlab::ParamTable table = boxlab::init_table(ids, config);

    std::vector<double> curve = boxlab::train(table, triplets, config);
    vlog(global, "trained " + std::to_string(ids.size()) + " boxes over " +
                     std::to_string(curve.size()) + " epochs, final loss " + fmt(curve.back()));

    boxlab::BoxTable fitted = table.to_box_table();
    if (!eval.empty()) {
        for (boxlab::RelationKind kind :
             {boxlab::RelationKind::entailment, boxlab::RelationKind::similarity}) {
            bool any = std::any_of(eval.begin(), eval.end(),
                                   [&](const auto& t) { return t.kind == kind; });
            if (!any) continue;
            double acc = boxlab::eval_triplet_accuracy(fitted, eval, kind, config.gumbel);
            std::cerr << "boxlab: held-out " << boxlab::to_string(kind) << " accuracy " << fmt(acc)
                      << '\n';
        }
    }
    boxlab::write_box_table(fitted, opts.out_path);
}

// ---------------------------------------------------------------------------
// reduce: Box-SNE projection to low dimension

struct ReduceOpts {
    std::string boxes_path;
    std::string out_path;
    int target_dim = 2;
    int iters = 300;
    double learning_rate = 0.1;
    double alpha = 0.8;
    double beta = 0.2;
    bool report = false;
};

void run_reduce(const GlobalOpts& global, const ReduceOpts& opts) {
    boxlab::BoxTable high = boxlab::read_box_table(opts.boxes_path);
    boxlab::SneWeights weights;
    weights.alpha = opts.alpha;
    weights.beta = opts.beta;
    boxlab::SneResult result =
        boxlab::reduce(high, static_cast<std::size_t>(opts.target_dim), weights, {}, opts.iters,
                       opts.learning_rate, global.seed);
    vlog(global, "loss " + fmt(result.trace.front()) + " -> " + fmt(result.trace.back()));

    boxlab::BoxTable low;
    for (std::size_t i = 0; i < high.size(); ++i)
        low.add(high.id(i), result.boxes[i].to_box());
    boxlab::write_box_table(low, opts.out_path);

    if (opts.report) {
        boxlab::PreservationReport report = boxlab::evaluate_preservation(high, result.boxes);
        auto show = [](const std::optional<double>& rho) {
            return rho ? fmt(*rho) : std::string("n/a");
        };
        std::cout << "spearman\tvolume\t" << show(report.volume_spearman) << '\n';
        std::cout << "spearman\tintersection\t" << show(report.intersection_spearman) << '\n';
        std::cout << "spearman\tentailment\t" << show(report.entailment_spearman) << '\n';
    }
}

// ---------------------------------------------------------------------------
// cluster: agglomerate a box table into a merge tree

struct ClusterOpts {
    std::string boxes_path;
    std::string scores_path;
    std::string out_path;
};

void run_cluster(const GlobalOpts& global, const ClusterOpts& opts) {
    boxlab::BoxTable table = boxlab::read_box_table(opts.boxes_path);
    if (!opts.scores_path.empty()) {
        boxlab::ScoreTable scores = boxlab::read_scores(opts.scores_path);
        boxlab::BoxTable scored;
        for (std::size_t i = 0; i < table.size(); ++i)
            if (scores.has(table.id(i))) scored.add(table.id(i), table.box(i));
        if (scored.empty()) throw input_error("no boxes carry scores; nothing to cluster");
        table = std::move(scored);
    }
    boxlab::ClusterTree tree = boxlab::agglomerate(table);
    vlog(global, "clustered " + std::to_string(tree.leaf_count()) + " leaves into " +
                     std::to_string(tree.nodes.size()) + " nodes");
    boxlab::write_tree(tree, opts.out_path);
}

// ---------------------------------------------------------------------------
// analyze: metrics over a tree plus scores (and optional pairs)

struct AnalyzeOpts {
    std::string tree_path;
    std::string scores_path;
    std::string pairs_path;
    std::string models_dir;
    std::string baseline_tree_path;
    std::string out_path;
};

void analyze_one(const boxlab::ClusterTree& tree, const boxlab::ScoreTable& scores,
                 const std::vector<boxlab::SpecificityPair>& pairs,
                 const boxlab::ClusterTree* baseline, const std::string& prefix,
                 std::uint64_t seed, std::ostream& out) {
    boxlab::LocalConsistency consistency = boxlab::local_score_consistency(tree, scores, seed);
    out << prefix << "consistency\tmethod_diff\t" << fmt(consistency.method_diff) << '\n';
    out << prefix << "consistency\trandom_diff\t" << fmt(consistency.random_diff) << '\n';
    out << prefix << "consistency\timprovement_percent\t" << fmt(consistency.improvement_percent)
        << '\n';

    if (!pairs.empty()) {
        boxlab::SpecificityResult spec = boxlab::specificity_agreement(tree, pairs);
        out << prefix << "specificity\tpercent\t" << fmt(spec.percent) << '\n';
        out << prefix << "specificity\tdirection_free\t" << fmt(spec.direction_free) << '\n';
    }

    boxlab::WeaknessReport weakness = boxlab::weakness_clusters(tree, scores);
    out << prefix << "weakness\tthreshold\t" << fmt(weakness.threshold) << '\n';
    int count2 = weakness.counts.count(2) ? weakness.counts.at(2) : 0;
    out << prefix << "weakness\tclusters_size2\t" << count2 << '\n';
    out << prefix << "weakness\tauc\t" << weakness.auc << '\n';

    if (baseline) {
        boxlab::WeaknessReport base = boxlab::weakness_clusters(*baseline, scores);
        boxlab::WeaknessComparison cmp = boxlab::compare_weakness(weakness, base);
        out << prefix << "compare\tclusters_size2_percent\t" << fmt(cmp.pair_count_percent)
            << '\n';
        out << prefix << "compare\tauc_percent\t" << fmt(cmp.auc_percent) << '\n';
    }
}

void run_analyze(const GlobalOpts& global, const AnalyzeOpts& opts) {
    if (opts.scores_path.empty() && opts.models_dir.empty())
        throw input_error("analyze needs --scores or --models-dir");

    boxlab::ClusterTree tree = boxlab::read_tree(opts.tree_path);
    std::vector<boxlab::SpecificityPair> pairs;
    if (!opts.pairs_path.empty()) pairs = boxlab::read_pairs(opts.pairs_path);

    std::optional<boxlab::ClusterTree> baseline;
    if (!opts.baseline_tree_path.empty())
        baseline = boxlab::read_tree(opts.baseline_tree_path);
    const boxlab::ClusterTree* baseline_ptr = baseline ? &*baseline : nullptr;

    std::ostringstream report;
    if (!opts.scores_path.empty()) {
        boxlab::ScoreTable scores = boxlab::read_scores(opts.scores_path);
        analyze_one(tree, scores, pairs, baseline_ptr, "", global.seed, report);
    } else {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(opts.models_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".tsv")
                files.push_back(entry.path());
        if (files.empty()) throw input_error("no .tsv score files in " + opts.models_dir);
        std::sort(files.begin(), files.end());

        double mean_improvement = 0.0, mean_auc = 0.0, mean_count2 = 0.0;
        for (const auto& file : files) {
            boxlab::ScoreTable scores = boxlab::read_scores(file.string());
            std::string model = file.stem().string();
            analyze_one(tree, scores, pairs, baseline_ptr, model + "\t", global.seed, report);
            boxlab::LocalConsistency c = boxlab::local_score_consistency(tree, scores, global.seed);
            boxlab::WeaknessReport w = boxlab::weakness_clusters(tree, scores);
            mean_improvement += c.improvement_percent;
            mean_auc += w.auc;
            mean_count2 += w.counts.count(2) ? w.counts.at(2) : 0;
        }
        double n = static_cast<double>(files.size());
        report << "mean\tconsistency\timprovement_percent\t" << fmt(mean_improvement / n) << '\n';
        report << "mean\tweakness\tclusters_size2\t" << fmt(mean_count2 / n) << '\n';
        report << "mean\tweakness\tauc\t" << fmt(mean_auc / n) << '\n';
    }

    if (opts.out_path.empty()) {
        std::cout << report.str();
    } else {
        std::ofstream out(opts.out_path, std::ios::binary);
        if (!out) throw input_error("cannot write " + opts.out_path);
        out << report.str();
        if (!out) throw input_error("cannot write " + opts.out_path);
    }
}

// ---------------------------------------------------------------------------
// render: SVG picture of a 2D box table colored by score

struct RenderOpts {
    std::string boxes_path;
    std::string scores_path;
    std::string out_path;
    boxlab::RenderSpec spec;
};

void run_render(const GlobalOpts& global, const RenderOpts& opts) {
    boxlab::BoxTable table = boxlab::read_box_table(opts.boxes_path);
    boxlab::ScoreTable scores;
    if (!opts.scores_path.empty()) scores = boxlab::read_scores(opts.scores_path);
    boxlab::render_svg(table, scores, opts.spec, opts.out_path);
    vlog(global, "rendered " + std::to_string(table.size()) + " boxes to " + opts.out_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"box embedding toolkit: synthesize, fit, reduce, cluster, analyze, render"};
    app.require_subcommand(1);
    app.footer("Environment: BOXLAB_THREADS caps worker threads (default: machine parallelism).");

    GlobalOpts global;
    app.add_option("--seed", global.seed, "seed for all randomized steps");
    app.add_flag("--verbose", global.verbose, "progress messages on stderr");

    SynthOpts synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a ground-truth box hierarchy");
    synth_cmd->add_option("--depth", synth.depth, "tree depth (levels)");
    synth_cmd->add_option("--branching", synth.branching, "children per node");
    synth_cmd->add_option("--dim", synth.dim, "embedding dimension");
    synth_cmd->add_option("--shrink", synth.shrink, "child half-width ratio");
    synth_cmd->add_option("--out-boxes", synth.out_boxes, "box table output")->required();
    synth_cmd->add_option("--out-triplets", synth.out_triplets, "triplet file output");
    synth_cmd->add_option("--triplet-kind", synth.triplet_kind,
                          "both, entailment, or similarity");
    synth_cmd->add_option("--negatives", synth.negatives, "negatives per triplet");
    synth_cmd->add_option("--out-scores", synth.out_scores, "leaf score file output");
    synth_cmd->add_option("--weak-subtree", synth.weak_subtree, "low-scoring subtree root");
    synth_cmd->add_option("--weak-mean", synth.weak_mean, "mean score inside the weak subtree");
    synth_cmd->add_option("--strong-mean", synth.strong_mean, "mean score elsewhere");
    synth_cmd->add_option("--noise", synth.noise, "uniform score noise half-width");
    synth_cmd->add_option("--out-pairs", synth.out_pairs, "specificity pair file output");
    synth_cmd->add_option("--pairs", synth.pair_count, "number of pairs to sample");
    synth_cmd->callback([&] { run_synth(global, synth); });

    FitOpts fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "train box embeddings from triplets");
    fit_cmd->add_option("--triplets", fit.triplets_path, "triplet file")->required();
    fit_cmd->add_option("--out", fit.out_path, "fitted box table output")->required();
    fit_cmd->add_option("--config", fit.config_path, "JSON config file");
    fit_cmd->add_option("--holdout", fit.holdout, "fraction of triplets held out for eval");
    fit_cmd->add_option("--dim", fit.dim, "embedding dimension");
    fit_cmd->add_option("--epochs", fit.epochs, "training epochs");
    fit_cmd->add_option("--lr", fit.learning_rate, "learning rate");
    fit_cmd->add_option("--batch", fit.batch_size, "batch size");
    fit_cmd->add_option("--loss-space", fit.loss_space, "log or raw");
    fit_cmd->add_option("--momentum", fit.momentum, "momentum coefficient");
    fit_cmd->add_option("--scale", fit.softmax_scale, "softmax score scale");
    fit_cmd->callback([&] { run_fit(global, fit, fit_cmd); });

    ReduceOpts reduce;
    CLI::App* reduce_cmd = app.add_subcommand("reduce", "project boxes to low dimension");
    reduce_cmd->add_option("--boxes", reduce.boxes_path, "input box table")->required();
    reduce_cmd->add_option("--out", reduce.out_path, "low-dimensional box table")->required();
    reduce_cmd->add_option("--dim", reduce.target_dim, "target dimension");
    reduce_cmd->add_option("--iters", reduce.iters, "descent iterations");
    reduce_cmd->add_option("--lr", reduce.learning_rate, "initial learning rate");
    reduce_cmd->add_option("--alpha", reduce.alpha, "intersection KL weight");
    reduce_cmd->add_option("--beta", reduce.beta, "entailment KL weight");
    reduce_cmd->add_flag("--report", reduce.report, "print preservation rank correlations");
    reduce_cmd->callback([&] { run_reduce(global, reduce); });

    ClusterOpts cluster;
    CLI::App* cluster_cmd = app.add_subcommand("cluster", "agglomerate boxes into a merge tree");
    cluster_cmd->add_option("--boxes", cluster.boxes_path, "input box table")->required();
    cluster_cmd->add_option("--scores", cluster.scores_path,
                            "restrict clustering to ids present in this score file");
    cluster_cmd->add_option("--out", cluster.out_path, "tree file output")->required();
    cluster_cmd->callback([&] { run_cluster(global, cluster); });

    AnalyzeOpts analyze;
    CLI::App* analyze_cmd = app.add_subcommand("analyze", "score-structure metrics over a tree");
    analyze_cmd->add_option("--tree", analyze.tree_path, "tree file")->required();
    analyze_cmd->add_option("--scores", analyze.scores_path, "score file");
    analyze_cmd->add_option("--pairs", analyze.pairs_path, "specificity pair file");
    analyze_cmd->add_option("--models-dir", analyze.models_dir,
                            "directory of per-model .tsv score files");
    analyze_cmd->add_option("--baseline-tree", analyze.baseline_tree_path,
                            "tree to compare weakness reports against");
    analyze_cmd->add_option("--out", analyze.out_path, "report output (default stdout)");
    analyze_cmd->callback([&] { run_analyze(global, analyze); });

    RenderOpts render;
    CLI::App* render_cmd = app.add_subcommand("render", "draw a 2D box table as SVG");
    render_cmd->add_option("--boxes", render.boxes_path, "2D box table")->required();
    render_cmd->add_option("--scores", render.scores_path, "score file for coloring");
    render_cmd->add_option("--out", render.out_path, "SVG output path")->required();
    render_cmd->add_option("--width", render.spec.width, "canvas width in pixels");
    render_cmd->add_option("--height", render.spec.height, "canvas height in pixels");
    render_cmd->add_option("--score-min", render.spec.score_min, "color scale lower bound");
    render_cmd->add_option("--score-max", render.spec.score_max, "color scale upper bound");
    render_cmd->add_option("--stroke", render.spec.stroke_width, "rectangle stroke width");
    render_cmd->add_flag("--labels", render.spec.labels, "draw box ids");
    render_cmd->callback([&] { run_render(global, render); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const input_error& e) {
        std::cerr << "boxlab: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "boxlab: internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
