/*
 * Copyright 2026 The apknn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "apknn.hpp"

namespace fs = std::filesystem;
using namespace apknn;

namespace {

// Exit codes: 0 success, 1 failed verification or reproduction, 2 error.
struct Failed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Global {
    std::string config_path;
    RunConfig config;
};

struct CompileFlags {
    std::uint32_t packing = 1;
    bool multiplexing = false;
    bool counter_increment = false;
    std::string reduction;  // "p:k'"
    std::optional<std::uint32_t> capacity;
};

void add_compile_flags(CLI::App* app, CompileFlags& f) {
    app->add_option("--packing", f.packing, "vectors per packed group")->check(CLI::PositiveNumber);
    app->add_flag("--multiplex", f.multiplexing, "carry up to 7 queries per frame");
    app->add_flag("--counter-increment", f.counter_increment, "use the increment-by-n counter extension");
    app->add_option("--reduction", f.reduction, "statistical reduction as p:k'");
    app->add_option("--capacity", f.capacity, "vectors per board image (default: profile for d)");
}

compiler::CompileOptions options_from(const CompileFlags& f, const Global& g, std::uint32_t dims) {
    compiler::CompileOptions o;
    o.packing = f.packing;
    o.multiplexing = f.multiplexing;
    o.counter_increment = f.counter_increment;
    o.fan_in = g.config.fabric.fan_in_limit;
    o.fan_out = g.config.fabric.fan_out_limit;
    if (f.capacity) {
        o.capacity = *f.capacity;
    } else {
        const auto it = g.config.capacity.capacity.find(dims);
        o.capacity = it != g.config.capacity.capacity.end() ? it->second : 1024;
    }
    if (!f.reduction.empty()) {
        const auto colon = f.reduction.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("--reduction expects p:k'");
        o.reduction = compiler::ReductionOptions{static_cast<std::uint32_t>(std::stoul(f.reduction.substr(0, colon))),
                                                 static_cast<std::uint32_t>(std::stoul(f.reduction.substr(colon + 1)))};
    }
    o.check();
    return o;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_file(path, text);
    }
}

std::string results_text(std::span<const codec::KnnResult> results) {
    std::ostringstream os;
    codec::write_results(os, results);
    return os.str();
}

std::string part_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "part-%04zu", i);
    return buf;
}

std::vector<compiler::BoardImage> load_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("'" + dir.string() + "' is not an image directory");
    std::vector<compiler::BoardImage> images;
    for (std::size_t i = 0;; ++i) {
        const auto img = dir / (part_name(i) + ".image.json");
        const auto lay = dir / (part_name(i) + ".layout.json");
        if (!fs::exists(img)) break;
        compiler::BoardImage b;
        b.automaton = fabric::image_from_string(read_file(img));
        b.layout = compiler::layout_from_json(nlohmann::json::parse(read_file(lay)));
        images.push_back(std::move(b));
    }
    if (images.empty()) throw std::runtime_error("no board images in '" + dir.string() + "'");
    return images;
}

// compile ------------------------------------------------------------------

struct CompileCmd {
    std::string input, out;
    CompileFlags flags;
};

void run_compile(const CompileCmd& c, const Global& g) {
    const auto data = io::read_dataset(c.input);
    if (data.rows() == 0) throw std::invalid_argument("dataset '" + c.input + "' has no vectors");
    const auto opt = options_from(c.flags, g, static_cast<std::uint32_t>(data.dims()));
    const auto images = compile_dataset(data, opt);
    fs::create_directories(c.out);

    nlohmann::json report = {{"dims", data.dims()}, {"vectors", data.rows()}, {"options", compiler::options_to_json(opt)}};
    auto parts = nlohmann::json::array();
    for (std::size_t i = 0; i < images.size(); ++i) {
        write_file(fs::path(c.out) / (part_name(i) + ".image.json"), fabric::image_to_string(images[i].automaton));
        write_file(fs::path(c.out) / (part_name(i) + ".layout.json"),
                   compiler::layout_to_json(images[i].layout).dump(2) + "\n");
        const auto t = resource::tally(images[i].automaton);
        auto j = resource::to_json(t, resource::place(t, g.config.fabric, g.config.capacity.rho));
        j["vectors"] = images[i].layout.slots.size() / images[i].layout.slices();
        parts.push_back(std::move(j));
    }
    report["partitions"] = std::move(parts);
    write_file(fs::path(c.out) / "resources.json", report.dump(2) + "\n");
    std::printf("compiled %zu vectors (d=%zu) into %zu board image(s) in %s\n", data.rows(), data.dims(),
                images.size(), c.out.c_str());
}

// query / oracle / verify --------------------------------------------------

struct QueryCmd {
    std::string images, queries, out;
    std::size_t k = 1;
};

void run_query(const QueryCmd& c) {
    const auto images = load_images(c.images);
    const auto q = io::read_dataset(c.queries);
    if (q.dims() != images.front().layout.dims)
        throw std::invalid_argument("queries have d=" + std::to_string(q.dims()) + " but the images expect d=" +
                                    std::to_string(images.front().layout.dims));
    const auto results = apknn::run_query(images, codec::QueryBatch::from_matrix(q), c.k);
    emit(c.out, results_text(results));
}

struct OracleCmd {
    std::string data, queries, out;
    std::size_t k = 1;
};

void run_oracle(const OracleCmd& c) {
    if (c.k < 1) throw std::invalid_argument("k must be at least 1");
    const auto data = io::read_dataset(c.data);
    const auto q = io::read_dataset(c.queries);
    emit(c.out, results_text(oracle::knn_exact(data, codec::QueryBatch::from_matrix(q), c.k)));
}

struct VerifyCmd {
    std::string data, queries;
    std::size_t k = 1;
    CompileFlags flags;
};

void run_verify(const VerifyCmd& c, const Global& g) {
    if (c.k < 1) throw std::invalid_argument("k must be at least 1");
    const auto data = io::read_dataset(c.data);
    const auto q = io::read_dataset(c.queries);
    const auto opt = options_from(c.flags, g, static_cast<std::uint32_t>(data.dims()));
    const auto batch = codec::QueryBatch::from_matrix(q);
    const auto images = compile_dataset(data, opt);
    const auto got = apknn::run_query(images, batch, c.k);
    const auto want = oracle::knn_exact(data, batch, c.k);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < want.size(); ++i) bad += got[i].neighbors != want[i].neighbors;
    std::printf("%zu queries over %zu image(s): %zu mismatch(es) against the exact scan\n", want.size(), images.size(),
                bad);
    if (bad) throw Failed("simulated results differ from the exact scan");
}

// index ---------------------------------------------------------------------

struct IndexBuildCmd {
    std::string data, out, kind = "kdtree";
    index::IndexParams params;
};

void run_index_build(IndexBuildCmd c, const Global& g) {
    const auto data = io::read_dataset(c.data);
    c.params.kind = index::kind_from_string(c.kind);
    if (c.params.seed == 0) c.params.seed = g.config.seeds.index;
    const auto idx = index::build(data, c.params);
    emit(c.out, index::to_json(idx).dump() + "\n");
    std::fprintf(stderr, "%s index: %zu buckets over %zu vectors\n", c.kind.c_str(), idx.buckets.size(), data.rows());
}

struct IndexSearchCmd {
    std::string index, data, queries, out;
    std::size_t k = 1;
    bool simulate = false;
};

void run_index_search(const IndexSearchCmd& c, const Global& g) {
    const auto idx = index::index_from_json(nlohmann::json::parse(read_file(c.index)));
    const auto data = io::read_dataset(c.data);
    const auto q = io::read_dataset(c.queries);
    const auto batch = codec::QueryBatch::from_matrix(q);
    const auto res = index::search(idx, data, batch, c.k, c.simulate ? index::ScanMode::Simulated : index::ScanMode::Fast);
    emit(c.out, results_text(res.results));

    const auto exact = oracle::knn_exact(data, batch, c.k);
    perf::WorkloadSpec w{"index", static_cast<std::uint32_t>(data.dims()), static_cast<std::uint32_t>(c.k), data.rows(),
                         q.rows(), idx.params.capacity};
    const auto stats = res.plan.stats();
    std::fprintf(stderr, "buckets visited %zu, recall@%zu %.4f, modeled runtime Gen1 %.6g s, Gen2 %.6g s\n",
                 res.plan.visits.size(), c.k, index::recall_at_k(res.results, exact),
                 perf::indexed_runtime(w, stats, 0.0, perf::Generation::Gen1, g.config.platform),
                 perf::indexed_runtime(w, stats, 0.0, perf::Generation::Gen2, g.config.platform));
}

// model -------------------------------------------------------------------

std::string fixed(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

void run_model_perf(const Global& g) {
    const auto& p = g.config.platform;
    std::printf("%-10s %5s %3s %8s %12s %10s %10s %10s %12s\n", "workload", "d", "k", "vectors", "small [ms]",
                "Gen1 [s]", "Gen2 [s]", "Opt+Ext", "Gen1 [q/J]");
    for (const auto& w : g.config.workloads) {
        const double g1 = perf::large_runtime(w, perf::Generation::Gen1, p);
        std::printf("%-10s %5u %3u %8u %12s %10s %10s %10s %12s\n", w.name.c_str(), w.dims, w.k, w.capacity,
                    fixed(perf::small_runtime(w, p) * 1e3, 3).c_str(), fixed(g1, 2).c_str(),
                    fixed(perf::large_runtime(w, perf::Generation::Gen2, p), 2).c_str(),
                    fixed(perf::optext_runtime(w, {}, p), 4).c_str(),
                    fixed(perf::energy_efficiency(w.queries, g1, p.dynamic_power_w), 2).c_str());
    }
}

void run_model_bandwidth(const Global& g, const std::string& reduction) {
    std::optional<perf::Reduction> r;
    if (!reduction.empty()) {
        const auto colon = reduction.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("--reduction expects p:k'");
        r = perf::Reduction{static_cast<std::uint32_t>(std::stoul(reduction.substr(0, colon))),
                            static_cast<std::uint32_t>(std::stoul(reduction.substr(colon + 1)))};
    }
    const auto& p = g.config.platform;
    std::printf("%-10s %12s %10s %s\n", "workload", "Gbps", "PCIe %", "status");
    for (const auto& w : g.config.workloads)
        std::printf("%-10s %12s %10s %s\n", w.name.c_str(), fixed(perf::report_bandwidth(w, r, p) / 1e9, 2).c_str(),
                    fixed(100 * perf::pcie_fraction(w, r, p), 1).c_str(),
                    perf::bandwidth_flagged(w, r, p) ? "over budget" : "ok");
}

void run_model_resources(const Global& g) {
    std::printf("%-10s %5s %8s %8s %8s %8s %10s %8s %8s %8s\n", "workload", "d", "vectors", "STEs", "counters",
                "blocks", "halfcores", "util", "pack x4", "decomp x4");
    std::mt19937_64 rng(g.config.seeds.data);
    for (const auto& w : g.config.workloads) {
        const auto data = BitMatrix::random(w.capacity, w.dims, rng);
        compiler::CompileOptions o;
        o.capacity = w.capacity;
        o.fan_in = g.config.fabric.fan_in_limit;
        o.fan_out = g.config.fabric.fan_out_limit;
        const auto img = compiler::compile(compiler::DatasetPartition::from_rows(data, 0, data.rows()), o);
        const auto t = resource::tally(img.automaton);
        const auto pl = resource::place(t, g.config.fabric, g.config.capacity.rho);
        std::printf("%-10s %5u %8u %8llu %8llu %8llu %10llu %7s%% %8s %8s\n", w.name.c_str(), w.dims, w.capacity,
                    (unsigned long long)t.total.stes, (unsigned long long)t.total.counters,
                    (unsigned long long)pl.occupied_blocks, (unsigned long long)pl.halfcores,
                    fixed(100 * pl.utilization, 1).c_str(),
                    fixed(resource::packing_savings(w.dims, 4, o.fan_in), 2).c_str(),
                    fixed(resource::decomposition_savings(img.automaton, 4), 2).c_str());
    }
}

// reproduce -----------------------------------------------------------------

struct ReproduceCmd {
    std::string csv;
    std::optional<std::uint32_t> trials, queries;
};

void run_reproduce(const std::string& table, const ReproduceCmd& c, Global g) {
    if (c.trials) g.config.experiment.trials = *c.trials;
    if (c.queries) g.config.experiment.queries = *c.queries;
    const auto t = reproduce::table(table, g.config);
    report::write_text(std::cout, t);
    if (!c.csv.empty()) {
        std::ostringstream os;
        report::write_csv(os, t);
        emit(c.csv, os.str());
    }
    if (!t.pass()) throw Failed(std::to_string(t.failures()) + " value(s) outside tolerance in " + table);
}

// generate ------------------------------------------------------------------

struct GenerateCmd {
    std::uint64_t n = 0;
    std::uint32_t d = 0;
    std::optional<std::uint64_t> seed;
    std::string out, format = "binary";
};

void run_generate(const GenerateCmd& c, const Global& g) {
    if (c.d == 0) throw std::invalid_argument("--dims must be positive");
    std::mt19937_64 rng(c.seed.value_or(g.config.seeds.data));
    const auto m = BitMatrix::random(c.n, c.d, rng);
    if (c.format != "binary" && c.format != "text") throw std::invalid_argument("--format is binary or text");
    io::write_dataset(c.out, m, c.format == "binary" ? io::DatasetFormat::Binary : io::DatasetFormat::Text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Automata-fabric Hamming kNN: compile, simulate, query and model"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);

    CompileCmd compile_cmd;
    auto* compile = app.add_subcommand("compile", "compile a dataset into board images");
    compile->add_option("input", compile_cmd.input, "dataset file")->required()->check(CLI::ExistingFile);
    compile->add_option("-o,--out", compile_cmd.out, "output directory")->required();
    add_compile_flags(compile, compile_cmd.flags);

    QueryCmd query_cmd;
    auto* query = app.add_subcommand("query", "run queries through compiled board images");
    query->add_option("images", query_cmd.images, "image directory")->required();
    query->add_option("queries", query_cmd.queries, "query file")->required()->check(CLI::ExistingFile);
    query->add_option("-k", query_cmd.k, "neighbors per query")->required()->check(CLI::PositiveNumber);
    query->add_option("-o,--out", query_cmd.out, "results file (default stdout)");

    OracleCmd oracle_cmd;
    auto* oracle_app = app.add_subcommand("oracle", "exact kNN by full scan");
    oracle_app->add_option("data", oracle_cmd.data, "dataset file")->required()->check(CLI::ExistingFile);
    oracle_app->add_option("queries", oracle_cmd.queries, "query file")->required()->check(CLI::ExistingFile);
    oracle_app->add_option("-k", oracle_cmd.k, "neighbors per query")->required()->check(CLI::PositiveNumber);
    oracle_app->add_option("-o,--out", oracle_cmd.out, "results file (default stdout)");

    VerifyCmd verify_cmd;
    auto* verify = app.add_subcommand("verify", "compile, simulate and compare against the exact scan");
    verify->add_option("data", verify_cmd.data, "dataset file")->required()->check(CLI::ExistingFile);
    verify->add_option("queries", verify_cmd.queries, "query file")->required()->check(CLI::ExistingFile);
    verify->add_option("-k", verify_cmd.k, "neighbors per query")->required()->check(CLI::PositiveNumber);
    add_compile_flags(verify, verify_cmd.flags);

    auto* index_app = app.add_subcommand("index", "spatial index structures");
    index_app->require_subcommand(1);
    IndexBuildCmd ib;
    auto* index_build = index_app->add_subcommand("build", "build an index over a dataset");
    index_build->add_option("data", ib.data, "dataset file")->required()->check(CLI::ExistingFile);
    index_build->add_option("-o,--out", ib.out, "index file")->required();
    index_build->add_option("--kind", ib.kind, "linear, kdtree, kmeans or lsh");
    index_build->add_option("--capacity", ib.params.capacity, "bucket capacity");
    index_build->add_option("--trees", ib.params.trees, "kd-trees or hash tables");
    index_build->add_option("--branching", ib.params.branching, "k-means branching factor");
    index_build->add_option("--bits", ib.params.bits_per_key, "LSH bits per key");
    index_build->add_option("--seed", ib.params.seed, "build seed (0: config seed)");
    ib.params.seed = 0;
    IndexSearchCmd is;
    auto* index_search = index_app->add_subcommand("search", "approximate kNN through an index");
    index_search->add_option("index", is.index, "index file")->required()->check(CLI::ExistingFile);
    index_search->add_option("data", is.data, "dataset file")->required()->check(CLI::ExistingFile);
    index_search->add_option("queries", is.queries, "query file")->required()->check(CLI::ExistingFile);
    index_search->add_option("-k", is.k, "neighbors per query")->required()->check(CLI::PositiveNumber);
    index_search->add_option("-o,--out", is.out, "results file (default stdout)");
    index_search->add_flag("--simulate", is.simulate, "scan buckets on the simulated fabric");

    auto* model = app.add_subcommand("model", "analytic models");
    model->require_subcommand(1);
    auto* model_perf = model->add_subcommand("perf", "runtime and energy per workload");
    std::string bw_reduction;
    auto* model_bw = model->add_subcommand("bandwidth", "report bandwidth per workload");
    model_bw->add_option("--reduction", bw_reduction, "statistical reduction as p:k'");
    auto* model_res = model->add_subcommand("resources", "resource use of one full board per workload");

    ReproduceCmd rc;
    auto* repro = app.add_subcommand("reproduce", "compare models with the reference tables");
    repro->require_subcommand(1);
    repro->add_option("--csv", rc.csv, "also write CSV here");
    repro->add_option("--trials", rc.trials, "Monte Carlo trials (table6)");
    repro->add_option("--queries", rc.queries, "queries per trial (table6)");
    for (const char* t : {"table1", "table2", "table6", "table7", "table8"}) repro->add_subcommand(t, std::string("reproduce ") + t);

    GenerateCmd gen;
    auto* generate = app.add_subcommand("generate", "write a uniform random dataset");
    generate->add_option("-n", gen.n, "vectors")->required();
    generate->add_option("-d,--dims", gen.d, "dimensions")->required();
    generate->add_option("--seed", gen.seed, "random seed (default: config data seed)");
    generate->add_option("--format", gen.format, "binary or text");
    generate->add_option("-o,--out", gen.out, "output file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!g.config_path.empty()) g.config = load_config(g.config_path);
        if (*compile) run_compile(compile_cmd, g);
        if (*query) run_query(query_cmd);
        if (*oracle_app) run_oracle(oracle_cmd);
        if (*verify) run_verify(verify_cmd, g);
        if (*index_build) run_index_build(ib, g);
        if (*index_search) run_index_search(is, g);
        if (*model_perf) run_model_perf(g);
        if (*model_bw) run_model_bandwidth(g, bw_reduction);
        if (*model_res) run_model_resources(g);
        for (auto* sub : repro->get_subcommands())
            if (*sub) run_reproduce(sub->get_name(), rc, g);
        if (*generate) run_generate(gen, g);
    } catch (const Failed& e) {
        std::fprintf(stderr, "apknn: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "apknn: error: %s\n", e.what());
        return 2;
    }
    return 0;
}
