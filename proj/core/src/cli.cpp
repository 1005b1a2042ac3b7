#include "dbn/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "dbn/csv.hpp"
#include "dbn/discover.hpp"
#include "dbn/em.hpp"
#include "dbn/errors.hpp"
#include "dbn/inference.hpp"
#include "dbn/model_io.hpp"
#include "dbn/report.hpp"
#include "dbn/sampling.hpp"
#include "dbn/scores.hpp"

namespace dbn {

namespace {

namespace fs = std::filesystem;

void write_text_atomic(const std::string& path, const std::string& text) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out << text;
        if (!out) throw DataError("failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string vocab_path_for(const std::string& model_path) {
    std::string stem = model_path;
    if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json")
        stem = stem.substr(0, stem.size() - 5);
    return stem + ".vocab.json";
}

ClusterPartition load_partition(const std::string& spec, const Dbn& model) {
    if (spec == "singletons")
        return ClusterPartition::singletons(model.num_vars());
    std::ifstream in(spec);
    if (!in) throw DataError("cannot open partition file '" + spec + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("partition file: " + std::string(e.what()));
    }
    ClusterPartition part;
    std::vector<bool> used(model.num_vars(), false);
    for (const auto& cluster : j.at("clusters")) {
        std::vector<int> ids;
        for (const auto& name : cluster) {
            auto id = model.find_variable(name.get<std::string>());
            if (!id)
                throw DataError("partition names unknown variable '" +
                                name.get<std::string>() + "'");
            ids.push_back(*id);
            used[*id] = true;
        }
        std::sort(ids.begin(), ids.end());
        part.clusters.push_back(std::move(ids));
    }
    // Unlisted variables become singleton clusters.
    for (int v = 0; v < model.num_vars(); ++v)
        if (!used[v]) part.clusters.push_back({v});
    part.validate(model.num_vars());
    return part;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data,
                                          double fraction) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw DataError("split fraction must be in (0, 1)");
    Dataset train, test;
    train.names = test.names = data.names;
    train.cardinalities = test.cardinalities = data.cardinalities;
    if (data.sequences.size() == 1) {
        // Single trajectory: one temporal cut.
        const auto& seq = data.sequences[0];
        const std::size_t cut = std::max<std::size_t>(
            2, static_cast<std::size_t>(fraction * double(seq.size())));
        if (cut + 2 > seq.size())
            throw DataError("sequence too short to split");
        train.sequences.push_back(
            {seq.begin(), seq.begin() + static_cast<long>(cut)});
        test.sequences.push_back(
            {seq.begin() + static_cast<long>(cut), seq.end()});
        return {train, test};
    }
    const std::size_t cut = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::round(fraction * double(data.sequences.size()))));
    if (cut >= data.sequences.size())
        throw DataError("split leaves no test sequences");
    for (std::size_t i = 0; i < data.sequences.size(); ++i)
        (i < cut ? train : test).sequences.push_back(data.sequences[i]);
    return {train, test};
}

EmConfig em_config(const RunConfig& cfg) {
    EmConfig em;
    em.tolerance = cfg.em_tolerance;
    em.max_iters = cfg.em_max_iters;
    return em;
}

SearchConfig search_config(const RunConfig& cfg) {
    SearchConfig sc;
    sc.score = cfg.score;
    sc.bde_ess = cfg.bde_ess;
    sc.max_indegree = cfg.max_indegree;
    sc.max_lag = cfg.max_lag;
    sc.allow_intra_slice = cfg.allow_intra_slice;
    sc.stages = cfg.stages;
    sc.candidates_per_child = cfg.candidates_per_child;
    sc.pseudocount = cfg.pseudocount;
    return sc;
}

std::string em_trace_jsonl(const std::vector<double>& trace, double slice0,
                           double transitions) {
    std::string out;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        nlohmann::json j;
        j["phase"] = "em";
        j["iteration"] = static_cast<int>(i);
        j["score"] = trace[i];
        j["bits_per_slice"] = bits_per_slice(trace[i], slice0, transitions);
        out += j.dump() + "\n";
    }
    return out;
}

int cmd_generate(const RunConfig& cfg) {
    const Dbn model = load_model(cfg.model_path);
    const Dataset data = sample_trajectories(model, cfg.sequences, cfg.length,
                                             cfg.seed, cfg.include_hidden);
    write_csv(cfg.out_path + ".tmp", data);
    fs::rename(cfg.out_path + ".tmp", cfg.out_path);
    std::cout << "wrote " << data.sequences.size() << " sequences x "
              << cfg.length << " slices to " << cfg.out_path << "\n";
    return kOk;
}

int cmd_learn_params(const RunConfig& cfg) {
    Dbn model = load_model(cfg.model_path);
    IngestOptions opts{cfg.buckets, cfg.continuous};
    auto [data, dict] = ingest_csv(cfg.data_path, opts);
    if (cfg.subsample > 1) data = subsample_dataset(data, cfg.subsample);
    const ClusterPartition partition =
        load_partition(cfg.partition_spec, model);

    EmResult result = parametric_em(model, data, partition, em_config(cfg));
    save_model(cfg.out_path, result.model);
    write_text_atomic(vocab_path_for(cfg.out_path), dict_to_json(dict));

    // The slice-0 mass of the final model, for the bits column.
    double slice0 = 0.0;
    const auto aligned = align_dataset(result.model, data);
    SliceTreeEngine engine(result.model, partition);
    for (const auto& seq : aligned)
        slice0 += engine.initial_alpha(seq[0]).log_scale;
    const double transitions =
        static_cast<double>(data.total_transitions());
    write_text_atomic(
        cfg.out_path + ".trace.jsonl",
        em_trace_jsonl(result.loglik_trace, slice0, transitions));

    if (!cfg.test_data_path.empty()) {
        const Dataset test = ingest_csv_with(cfg.test_data_path, dict);
        const double bits =
            holdout_bits_per_slice(result.model, test, partition);
        std::printf("%.4f bits/slice\n", bits);
    } else if (!result.loglik_trace.empty()) {
        std::printf("%.4f bits/slice (train)\n",
                    bits_per_slice(result.loglik_trace.back(), slice0,
                                   transitions));
    }
    return kOk;
}

int cmd_learn_struct(const RunConfig& cfg) {
    IngestOptions opts{cfg.buckets, cfg.continuous};
    auto [data, dict] = ingest_csv(cfg.data_path, opts);
    if (cfg.subsample > 1) data = subsample_dataset(data, cfg.subsample);

    Dbn init;
    if (!cfg.model_path.empty()) {
        init = load_model(cfg.model_path);
    } else {
        init = make_empty_model(data, cfg.max_indegree);
        set_empirical_prior(init, data);
    }
    const ClusterPartition partition =
        load_partition(cfg.partition_spec, init);

    SemConfig sem;
    sem.search = search_config(cfg);
    sem.search.max_lag = 1; // structural EM is Markovian; use discover for more
    sem.em = em_config(cfg);
    SemResult result = structural_em(init, data, partition, sem);

    save_model(cfg.out_path, result.model);
    write_text_atomic(vocab_path_for(cfg.out_path), dict_to_json(dict));
    std::string trace;
    for (const auto& rec : result.records) {
        nlohmann::json j;
        j["phase"] = rec.phase;
        j["iteration"] = rec.iteration;
        j["score"] = rec.score;
        j["bits_per_slice"] = rec.bits_per_slice;
        trace += j.dump() + "\n";
    }
    write_text_atomic(cfg.out_path + ".trace.jsonl", trace);
    std::cout << "learned structure with score "
              << (result.records.empty()
                      ? 0.0
                      : result.records.back().score)
              << "\n";
    return kOk;
}

std::string label_file_name(const std::string& label) {
    if (label == "fully observable only") return "model_baseline.json";
    std::string out = "model_";
    for (char c : label) out += c == ' ' ? '_' : c;
    return out + ".json";
}

int cmd_discover(const RunConfig& cfg) {
    IngestOptions opts{cfg.buckets, cfg.continuous};
    auto [all, dict] = ingest_csv(cfg.data_path, opts);
    if (cfg.subsample > 1) all = subsample_dataset(all, cfg.subsample);

    Dataset train, test;
    if (!cfg.test_data_path.empty()) {
        train = all;
        test = ingest_csv_with(cfg.test_data_path, dict);
        if (cfg.subsample > 1) test = subsample_dataset(test, cfg.subsample);
    } else {
        std::tie(train, test) = split_dataset(all, cfg.split_fraction);
    }

    DiscoveryConfig dc;
    dc.search = search_config(cfg);
    dc.em = em_config(cfg);
    dc.epsilon = cfg.epsilon;
    dc.rho = cfg.rho;
    dc.depth_cap = cfg.depth_cap;
    dc.max_iterations = cfg.iterations;
    dc.pseudocount = cfg.pseudocount;

    const auto records = discovery_pipeline(train, test, dc);

    fs::create_directories(cfg.out_path);
    RunTrace trace;
    trace.dataset = fs::path(cfg.data_path).stem().string();
    nlohmann::json jrecords = nlohmann::json::array();

    // Optional FHMM baselines, listed ahead of the learned models.
    for (int size : cfg.fhmm_sizes) {
        std::vector<std::pair<std::string, int>> obs;
        for (int c = 0; c < train.num_cols(); ++c)
            obs.push_back({train.names[c], train.cardinalities[c]});
        Dbn fhmm = fhmm_structure(size, 2, obs, cfg.max_indegree, cfg.seed);
        set_empirical_prior(fhmm, train);
        const ClusterPartition part =
            ClusterPartition::singletons(fhmm.num_vars());
        EmResult em =
            parametric_em_restarts(fhmm, train, part, dc.em, 3, cfg.seed);
        const double bits = holdout_bits_per_slice(em.model, test, part);
        const std::string label =
            "FHMM " + std::to_string(size) + " hid vars";
        trace.entries.push_back({label, bits});
        const std::string file = label_file_name(label);
        save_model((fs::path(cfg.out_path) / file).string(), em.model);
        nlohmann::json j;
        j["label"] = label;
        j["model"] = file;
        j["num_hidden"] = size;
        j["test_bits_per_slice"] = bits;
        jrecords.push_back(std::move(j));
    }

    for (const auto& rec : records) {
        const std::string file = label_file_name(rec.label);
        save_model((fs::path(cfg.out_path) / file).string(), rec.model);
        trace.entries.push_back({rec.label, rec.test_bits});
        nlohmann::json j;
        j["label"] = rec.label;
        j["model"] = file;
        j["num_hidden"] = rec.num_hidden;
        j["train_loglik"] = rec.train_loglik;
        j["test_bits_per_slice"] = rec.test_bits;
        j["non_markov_arcs"] = nlohmann::json::array();
        for (const auto& arc : rec.arcs_found) {
            nlohmann::json a;
            a["source"] = arc.source;
            a["lag"] = arc.lag;
            a["child"] = arc.child;
            a["gain"] = arc.gain;
            j["non_markov_arcs"].push_back(std::move(a));
        }
        jrecords.push_back(std::move(j));
    }

    const Report report = emit_report({trace});
    write_text_atomic((fs::path(cfg.out_path) / "report.txt").string(),
                      report.table);
    write_text_atomic((fs::path(cfg.out_path) / "report.json").string(),
                      nlohmann::json{{"records", jrecords}}.dump(2) + "\n");
    write_text_atomic((fs::path(cfg.out_path) / "vocab.json").string(),
                      dict_to_json(dict));
    std::cout << report.table;
    return kOk;
}

int cmd_eval(const RunConfig& cfg) {
    const Dbn model = load_model(cfg.model_path);
    Dataset test;
    const std::string vocab = vocab_path_for(cfg.model_path);
    if (fs::exists(vocab)) {
        test = ingest_csv_with(cfg.data_path, load_dict(vocab));
    } else {
        IngestOptions opts{cfg.buckets, cfg.continuous};
        test = ingest_csv(cfg.data_path, opts).first;
    }
    if (cfg.subsample > 1) test = subsample_dataset(test, cfg.subsample);
    const ClusterPartition partition =
        load_partition(cfg.partition_spec, model);
    std::vector<std::string> diagnostics;
    const double bits =
        holdout_bits_per_slice(model, test, partition, &diagnostics);
    for (const auto& d : diagnostics) std::cerr << "warning: " << d << "\n";
    std::printf("%.4f bits/slice\n", bits);
    return kOk;
}

int cmd_infer(const RunConfig& cfg) {
    const Dbn model = load_model(cfg.model_path);
    Dataset data;
    const std::string vocab = vocab_path_for(cfg.model_path);
    if (fs::exists(vocab)) {
        data = ingest_csv_with(cfg.data_path, load_dict(vocab));
    } else {
        IngestOptions opts{cfg.buckets, cfg.continuous};
        data = ingest_csv(cfg.data_path, opts).first;
    }
    const ClusterPartition partition =
        load_partition(cfg.partition_spec, model);
    const auto aligned = align_dataset(model, data);
    const SliceNodes sn{model.num_vars()};

    nlohmann::json out;
    out["sequences"] = nlohmann::json::array();
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        const SmoothResult smooth =
            calibrate_slice_trees(model, aligned[i], partition);
        const int len = static_cast<int>(aligned[i].size());
        nlohmann::json jseq;
        jseq["index"] = static_cast<int>(i);
        jseq["loglik"] = smooth.loglik;
        jseq["marginals"] = nlohmann::json::array();
        for (int s = 0; s < len; ++s) {
            const bool last = s == len - 1;
            const auto& tree = smooth.trees[last ? s - 1 : s];
            nlohmann::json jslice;
            for (int v = 0; v < model.num_vars(); ++v) {
                const int node[1] = {last ? sn.at_t1(v) : sn.at_t(v)};
                jslice[model.variables[v].name] = tree.marginal_query(node);
            }
            jseq["marginals"].push_back(std::move(jslice));
        }
        out["sequences"].push_back(std::move(jseq));
    }
    write_text_atomic(cfg.out_path, out.dump(2) + "\n");
    std::cout << "wrote posteriors for " << aligned.size()
              << " sequences to " << cfg.out_path << "\n";
    return kOk;
}

} // namespace

int run_command(const RunConfig& cfg) {
    try {
        if (cfg.command == "generate") return cmd_generate(cfg);
        if (cfg.command == "learn-params") return cmd_learn_params(cfg);
        if (cfg.command == "learn-struct") return cmd_learn_struct(cfg);
        if (cfg.command == "discover") return cmd_discover(cfg);
        if (cfg.command == "eval") return cmd_eval(cfg);
        if (cfg.command == "infer") return cmd_infer(cfg);
        std::cerr << "unknown command '" << cfg.command << "'\n";
        return kUsage;
    } catch (const ZeroMassEvidence& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumericError;
    } catch (const StateSpaceTooLarge& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumericError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const SchemaError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternalError;
    }
}

} // namespace dbn
