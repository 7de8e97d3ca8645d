// aggmrf: command-line driver for aggregate-only MRF training.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aggmrf/baselines.hpp"
#include "aggmrf/encodings.hpp"
#include "aggmrf/metrics.hpp"
#include "aggmrf/projection.hpp"
#include "aggmrf/trainer.hpp"

using namespace aggmrf;

namespace {

struct CsvFlags {
    std::string label = "y";
    std::vector<std::string> continuous;
    int bins = 10;
    std::string delimiter = ",";
    bool no_reserve = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--label", label, "label column (values 0/1)");
        cmd->add_option("--continuous", continuous, "columns discretized into quantile bins")->delimiter(',');
        cmd->add_option("--bins", bins, "quantile bins per continuous column")->check(CLI::PositiveNumber);
        cmd->add_option("--delimiter", delimiter, "field delimiter");
        cmd->add_flag("--no-reserve", no_reserve, "do not add an unseen-value modality per feature");
    }

    CsvOptions options() const {
        if (delimiter.size() != 1) throw Error("delimiter must be a single character");
        CsvOptions o;
        o.label_column = label;
        o.continuous_columns.insert(continuous.begin(), continuous.end());
        o.bins = bins;
        o.delimiter = delimiter[0];
        o.reserve_unseen = !no_reserve;
        return o;
    }
};

struct TrainFlags {
    TrainConfig cfg;
    std::string gradient = "rescaled";
    std::string init = "auto";
    bool exact = false;
    bool no_precondition = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--T,--iterations", cfg.iterations, "PCD iterations")->check(CLI::PositiveNumber);
        cmd->add_option("--n-prime", cfg.n_prime, "Gibbs particles")->check(CLI::PositiveNumber);
        cmd->add_option("--lambda-mu", cfg.lambda_mu, "L2 strength on mu");
        cmd->add_option("--lambda-theta", cfg.lambda_theta, "L2 strength on theta");
        cmd->add_option("--step-mu", cfg.step_mu, "step on mu (default 1/tables, x5 with --fast-weights)");
        cmd->add_option("--step-theta", cfg.step_theta, "step on theta (default 1/tables)");
        cmd->add_flag("--fast-weights", cfg.fast_weights, "five-fold step on mu");
        cmd->add_option("--gradient", gradient, "plain or rescaled")->check(CLI::IsMember({"plain", "rescaled"}));
        cmd->add_option("--init", init, "particle init: auto, marginals or uniform")
            ->check(CLI::IsMember({"auto", "marginals", "uniform"}));
        cmd->add_flag("--exact", exact, "exact expectations by enumeration (tiny spaces)");
        cmd->add_flag("--no-precondition", no_precondition, "plain gradient steps");
        cmd->add_option("--epsilon", cfg.epsilon_div, "division guard (default 1e-9 n)");
        cmd->add_option("--eval-period", cfg.eval_period, "score the test set every k iterations");
        cmd->add_option("--seed", cfg.seed, "random seed");
        cmd->add_option("--workers", cfg.workers, "threads for Gibbs sweeps")->check(CLI::PositiveNumber);
    }

    TrainConfig resolve(const ProjectionSet& ps) const {
        TrainConfig c = cfg;
        c.gradient = gradient == "plain" ? GradientMode::plain : GradientMode::rescaled;
        c.expectation = exact ? ExpectationMode::exact : ExpectationMode::gibbs;
        c.precondition = !no_precondition;
        if (init == "uniform" || (init == "auto" && ps.hashed()))
            c.init = InitStrategy::uniform;
        else
            c.init = InitStrategy::marginals;
        return c;
    }
};

/// Raw test/heldout files are encoded with the codec and encodings written
/// during aggregation, so their modality indices line up with the tables.
struct CodecFlags {
    std::string vocab;
    std::string encodings;

    void attach(CLI::App* cmd) {
        cmd->add_option("--vocab", vocab, "codec file written by 'aggregate --vocab-out'");
        cmd->add_option("--encodings", encodings, "target encodings applied after the codec");
    }

    Dataset load(const std::string& csv) const {
        if (vocab.empty()) throw Error("--vocab is required to read '" + csv + "'");
        const auto codec = CsvCodec::load(vocab);
        Dataset ds = load_csv(csv, codec);
        if (!encodings.empty()) ds = apply_encodings(ds, load_encodings(encodings, ds.schema()));
        return ds;
    }
};

void require_schema(const Dataset& ds, const ProjectionSet& ps, const std::string& what) {
    if (!(ds.schema() == ps.schema()))
        throw Error(what + " does not match the schema of the aggregated tables");
}

std::shared_ptr<const ProjectionSet> share(ProjectionSet ps) {
    return std::make_shared<const ProjectionSet>(std::move(ps));
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<std::size_t> feature_indices(const Schema& s, const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    for (const auto& n : names) {
        const auto idx = s.index_of(n);
        if (!idx) throw Error("unknown feature '" + n + "'");
        out.push_back(*idx);
    }
    return out;
}

// ---------------------------------------------------------------- aggregate

struct AggregateCmd {
    std::string input, out, vocab_in, vocab_out, encodings;
    CsvFlags csv;
    bool singles = false;
    bool pairs = false;
    bool no_singles_in_pairs = false;
    std::size_t hash = 0;
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--input", input, "CSV with header")->required();
        cmd->add_option("--out", out, "tables file")->required();
        csv.attach(cmd);
        cmd->add_option("--vocab", vocab_in, "reuse a frozen codec instead of fitting one");
        cmd->add_option("--vocab-out", vocab_out, "write the fitted codec");
        cmd->add_option("--encodings", encodings, "target encodings applied before aggregation");
        auto* s = cmd->add_flag("--singles", singles, "single-feature tables only");
        auto* p = cmd->add_flag("--pairs", pairs, "single and pairwise tables (default)");
        s->excludes(p);
        cmd->add_flag("--no-singles", no_singles_in_pairs, "pairwise tables without single-feature tables");
        cmd->add_option("--hash", hash, "hash rows into this many buckets")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", seed, "hash seed");
    }

    int run() const {
        Dataset ds;
        if (vocab_in.empty()) {
            auto loaded = load_csv(input, csv.options());
            ds = std::move(loaded.dataset);
            if (!vocab_out.empty()) loaded.codec.save(vocab_out);
        } else {
            const auto codec = CsvCodec::load(vocab_in);
            ds = load_csv(input, codec);
            if (!vocab_out.empty()) codec.save(vocab_out);
        }
        if (!encodings.empty()) ds = apply_encodings(ds, load_encodings(encodings, ds.schema()));
        if (ds.empty()) throw Error("empty dataset");

        ProjectionSet ps = singles ? ProjectionSet::build_single(ds.schema())
                                   : ProjectionSet::build_pairwise(ds.schema(), !no_singles_in_pairs);
        AggregatedData agg = aggregate(ps, ds);
        if (hash > 0) {
            auto hashed = ProjectionSet::build_hashed(ps, hash, seed);
            agg = push_through_buckets(hashed, agg);
            ps = std::move(hashed);
        }
        write_tables(agg, ps, out);
        std::cout << "n=" << ds.size() << " D=" << ds.dims() << " K=" << ps.size() << " tables=" << ps.num_tables()
                  << '\n';
        return 0;
    }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
    std::string tables, test, out, trace;
    TrainFlags train;
    CodecFlags codec;

    void attach(CLI::App* cmd) {
        cmd->add_option("--tables", tables, "aggregated tables file")->required();
        cmd->add_option("--test", test, "raw test CSV scored during training");
        cmd->add_option("--out", out, "model file");
        cmd->add_option("--trace", trace, "trace CSV");
        train.attach(cmd);
        codec.attach(cmd);
    }

    int run() const {
        auto [agg, ps_value] = read_tables(tables);
        const auto ps = share(std::move(ps_value));
        TrainConfig cfg = train.resolve(*ps);
        std::optional<Dataset> test_ds;
        if (!test.empty()) {
            test_ds = codec.load(test);
            require_schema(*test_ds, *ps, "test file");
            cfg.test = &*test_ds;
            if (cfg.eval_period <= 0) cfg.eval_period = 1;
        }
        const auto result = pcd_train(agg, ps, cfg);
        if (!out.empty()) save_model(result.params, out);
        if (!trace.empty()) result.trace.write_csv(trace);
        const auto& last = result.trace.rows.back();
        std::cout << "iterations=" << last.iter << " moment_gap=" << last.moment_gap;
        if (last.test_nllh) std::cout << " test_nllh=" << *last.test_nllh;
        if (result.best_test_nllh)
            std::cout << " best_test_nllh=" << *result.best_test_nllh << " best_iteration=" << result.best_iteration;
        std::cout << '\n';
        return 0;
    }
};

// ---------------------------------------------------------------- evaluate

struct EvaluateCmd {
    std::string model, tables, test, out;
    CodecFlags codec;

    void attach(CLI::App* cmd) {
        cmd->add_option("--model", model, "model file")->required();
        cmd->add_option("--tables", tables, "tables file the model was trained on")->required();
        cmd->add_option("--test", test, "raw test CSV")->required();
        cmd->add_option("--out", out, "report file (stdout when omitted)");
        codec.attach(cmd);
    }

    int run() const {
        auto [agg, ps_value] = read_tables(tables);
        const auto ps = share(std::move(ps_value));
        const auto params = load_model(model, ps);
        const Dataset ds = codec.load(test);
        require_schema(ds, *ps, "test file");
        write_text(out, evaluate(params, ds).to_json() + "\n");
        return 0;
    }
};

// ---------------------------------------------------------------- grid

struct GridCmd {
    std::string tables, test, out;
    std::vector<double> lambda_mu{1, 4, 16, 64};
    std::vector<double> lambda_theta{1, 4, 16, 64};
    bool best = false;
    TrainFlags train;
    CodecFlags codec;

    void attach(CLI::App* cmd) {
        cmd->add_option("--tables", tables, "aggregated tables file")->required();
        cmd->add_option("--test", test, "raw test CSV")->required();
        cmd->add_option("--out", out, "matrix CSV (stdout when omitted)");
        cmd->add_option("--lambda-mu-list", lambda_mu, "columns")->delimiter(',')->check(CLI::Number);
        cmd->add_option("--lambda-theta-list", lambda_theta, "rows")->delimiter(',')->check(CLI::Number);
        cmd->add_flag("--best", best, "report the best scored iteration instead of the last");
        train.attach(cmd);
        codec.attach(cmd);
    }

    int run() const {
        if (lambda_mu.empty() || lambda_theta.empty()) throw Error("empty regularization list");
        auto [agg, ps_value] = read_tables(tables);
        const auto ps = share(std::move(ps_value));
        const Dataset ds = codec.load(test);
        require_schema(ds, *ps, "test file");

        std::ostringstream csv;
        csv << "lambda_theta\\lambda_mu";
        for (double lm : lambda_mu) csv << ',' << lm;
        csv << '\n';
        for (double lt : lambda_theta) {
            csv << lt;
            for (double lm : lambda_mu) {
                TrainConfig cfg = train.resolve(*ps);
                cfg.lambda_mu = lm;
                cfg.lambda_theta = lt;
                cfg.test = &ds;
                if (cfg.eval_period <= 0) cfg.eval_period = cfg.iterations;
                const auto result = pcd_train(agg, ps, cfg);
                const double score = best ? *result.best_test_nllh : *result.trace.rows.back().test_nllh;
                csv << ',' << fmt(score);
                std::cerr << "lambda_theta=" << lt << " lambda_mu=" << lm << " nllh=" << fmt(score) << '\n';
            }
            csv << '\n';
        }
        write_text(out, csv.str());
        return 0;
    }
};

// ---------------------------------------------------------------- baselines

struct BaselinesCmd {
    std::string train_csv, test_csv, which = "all", out;
    CsvFlags csv;
    int grid_lo = -2, grid_hi = 10;
    double b2f_lambda = 1;
    int max_iterations = 2000;
    TrainFlags nb;

    void attach(CLI::App* cmd) {
        cmd->add_option("--train", train_csv, "training CSV")->required();
        cmd->add_option("--test", test_csv, "test CSV")->required();
        cmd->add_option("--which", which, "nb, logistic, b2f or all");
        cmd->add_option("--out", out, "report file (stdout when omitted)");
        cmd->add_option("--grid-lo", grid_lo, "smallest log2 lambda for the logistic skyline");
        cmd->add_option("--grid-hi", grid_hi, "largest log2 lambda for the logistic skyline");
        cmd->add_option("--b2f-lambda", b2f_lambda, "L2 strength of the two-feature models");
        cmd->add_option("--max-iterations", max_iterations, "logistic iteration cap")->check(CLI::PositiveNumber);
        csv.attach(cmd);
        nb.attach(cmd);
    }

    int run() const {
        if (which != "nb" && which != "logistic" && which != "b2f" && which != "all")
            throw Error("unknown baseline '" + which + "'");
        auto loaded = load_csv(train_csv, csv.options());
        const Dataset& train = loaded.dataset;
        const Dataset test = load_csv(test_csv, loaded.codec);
        std::ostringstream report;

        if (which == "nb" || which == "all") {
            const auto ps = share(ProjectionSet::build_single(train.schema()));
            const auto agg = aggregate(*ps, train);
            const auto r = train_naive_bayes(agg, ps, nb.resolve(*ps), test);
            report << "nb best_iteration=" << r.best_iteration << " (best on test) " << r.best_report.to_json()
                   << '\n';
        }
        if (which == "logistic" || which == "all") {
            const auto ps = share(ProjectionSet::build_pairwise(train.schema(), true));
            const auto grid = log2_grid(grid_lo, grid_hi);
            const auto r = best_logistic(train, test, ps, grid, max_iterations);
            report << "logistic lambda=" << r.model.lambda << " iterations=" << r.model.iterations << ' '
                   << r.report.to_json() << '\n';
        }
        if (which == "b2f" || which == "all") {
            const auto r = best_two_features(train, test, b2f_lambda, nb.cfg.workers);
            report << "b2f pair=" << train.schema()[r.first].name << ',' << train.schema()[r.second].name << ' '
                   << r.report.to_json() << '\n';
        }
        write_text(out, report.str());
        return 0;
    }
};

// ---------------------------------------------------------------- synth

struct SynthCmd {
    std::string kind = "xor", out;
    std::size_t n = 100000;
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--kind", kind, "generator (xor)");
        cmd->add_option("--n", n, "records")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--out", out, "CSV output")->required();
    }

    int run() const {
        if (kind != "xor") throw Error("unknown generator '" + kind + "'");
        const Dataset ds = generate_xor(n, seed);
        std::ofstream f(out);
        if (!f) throw Error("cannot write '" + out + "'");
        f << "x1,x2,x3,y\n";
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto x = ds.x(i);
            f << x[0] << ',' << x[1] << ',' << x[2] << ',' << ds.y(i) << '\n';
        }
        return 0;
    }
};

// ---------------------------------------------------------------- encode

struct EncodeCmd {
    std::string heldout, vocab, out;
    std::vector<std::string> features;
    int count_bins = 8, ctr_bins = 16;
    double prior = 10;

    void attach(CLI::App* cmd) {
        cmd->add_option("--heldout", heldout, "held-out CSV the encodings are fitted on")->required();
        cmd->add_option("--vocab", vocab, "codec file written by 'aggregate --vocab-out'")->required();
        cmd->add_option("--features", features, "features to encode")->delimiter(',')->required();
        cmd->add_option("--count-bins", count_bins, "occurrence-count bins")->check(CLI::PositiveNumber);
        cmd->add_option("--ctr-bins", ctr_bins, "positive-rate bins")->check(CLI::PositiveNumber);
        cmd->add_option("--prior", prior, "smoothing strength toward the global rate");
        cmd->add_option("--out", out, "encoding file")->required();
    }

    int run() const {
        const Dataset ds = load_csv(heldout, CsvCodec::load(vocab));
        std::vector<TargetEncoding> enc;
        for (auto d : feature_indices(ds.schema(), features))
            enc.push_back(fit_target_encoding(ds, d, count_bins, ctr_bins, prior));
        save_encodings(enc, out);
        for (const auto& e : enc)
            std::cout << e.name << ": " << ds.schema().cardinality(e.feature) << " -> " << e.cardinality() << '\n';
        return 0;
    }
};

// ---------------------------------------------------------------- triplets

struct TripletsCmd {
    std::string train_csv, test_csv, out;
    CsvFlags csv;
    Modality max_modalities = 10;
    double lambda = 1;
    TrainFlags train;

    void attach(CLI::App* cmd) {
        cmd->add_option("--train", train_csv, "training CSV")->required();
        cmd->add_option("--test", test_csv, "test CSV")->required();
        cmd->add_option("--out", out, "per-triplet CSV (stdout when omitted)");
        cmd->add_option("--max-modalities", max_modalities, "skip features with more modalities");
        cmd->add_option("--lambda", lambda, "L2 strength of MRF theta and of the logistic model");
        csv.attach(cmd);
        train.attach(cmd);
    }

    int run() const {
        auto loaded = load_csv(train_csv, csv.options());
        const Dataset& train_ds = loaded.dataset;
        const Dataset test_ds = load_csv(test_csv, loaded.codec);
        std::vector<std::size_t> kept;
        for (std::size_t d = 0; d < train_ds.dims(); ++d)
            if (train_ds.schema().cardinality(d) <= max_modalities) kept.push_back(d);

        std::ostringstream csv_out;
        csv_out << "f1,f2,f3,mrf_nllh,logistic_nllh,nb_nllh\n";
        for (std::size_t a = 0; a < kept.size(); ++a)
            for (std::size_t b = a + 1; b < kept.size(); ++b)
                for (std::size_t c = b + 1; c < kept.size(); ++c) {
                    const std::size_t cols[3] = {kept[a], kept[b], kept[c]};
                    const Dataset tr = select_features(train_ds, cols);
                    const Dataset te = select_features(test_ds, cols);

                    const auto pair_ps = share(ProjectionSet::build_pairwise(tr.schema(), true));
                    TrainConfig cfg = train.resolve(*pair_ps);
                    cfg.lambda_theta = lambda;
                    if (tr.schema().state_space_size() <= cfg.enumeration_cap / 2)
                        cfg.expectation = ExpectationMode::exact;
                    const auto mrf = pcd_train(aggregate(*pair_ps, tr), pair_ps, cfg);
                    const double mrf_score = evaluate(mrf.params, te).nllh;

                    const auto logit = train_logistic(tr, pair_ps, {lambda, 2000, 1e-6});
                    const double logit_score = evaluate(logit, te).nllh;

                    const auto single_ps = share(ProjectionSet::build_single(tr.schema()));
                    TrainConfig nb_cfg = train.resolve(*single_ps);
                    nb_cfg.expectation = cfg.expectation;
                    const auto nb = train_naive_bayes(aggregate(*single_ps, tr), single_ps, nb_cfg, te);

                    csv_out << tr.schema()[0].name << ',' << tr.schema()[1].name << ',' << tr.schema()[2].name
                            << ',' << fmt(mrf_score) << ',' << fmt(logit_score) << ','
                            << fmt(nb.best_report.nllh) << '\n';
                }
        write_text(out, csv_out.str());
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning a binary classifier from aggregated contingency tables"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "aggmrf 1.0");

    AggregateCmd aggregate_cmd;
    TrainCmd train_cmd;
    EvaluateCmd evaluate_cmd;
    GridCmd grid_cmd;
    BaselinesCmd baselines_cmd;
    SynthCmd synth_cmd;
    EncodeCmd encode_cmd;
    TripletsCmd triplets_cmd;

    auto* agg = app.add_subcommand("aggregate", "discretize a CSV and write contingency tables");
    aggregate_cmd.attach(agg);
    auto* train = app.add_subcommand("train", "PCD training from a tables file");
    train_cmd.attach(train);
    train->set_config("--config", "", "key=value file of training flags");
    auto* eval = app.add_subcommand("evaluate", "score a saved model on a test CSV");
    evaluate_cmd.attach(eval);
    auto* grid = app.add_subcommand("grid", "test NLLH over a lambda_theta x lambda_mu grid");
    grid_cmd.attach(grid);
    auto* base = app.add_subcommand("baselines", "Naive Bayes, logistic skyline and best two-feature model");
    baselines_cmd.attach(base);
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd.attach(synth);
    auto* encode = app.add_subcommand("encode", "fit target encodings on held-out data");
    encode_cmd.attach(encode);
    auto* triplets = app.add_subcommand("triplets", "MRF vs logistic vs NB on every feature triplet");
    triplets_cmd.attach(triplets);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*agg) return aggregate_cmd.run();
        if (*train) return train_cmd.run();
        if (*eval) return evaluate_cmd.run();
        if (*grid) return grid_cmd.run();
        if (*base) return baselines_cmd.run();
        if (*synth) return synth_cmd.run();
        if (*encode) return encode_cmd.run();
        if (*triplets) return triplets_cmd.run();
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort at iteration " << e.iteration() << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
