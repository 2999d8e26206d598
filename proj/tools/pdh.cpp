// pdh: train part-based hashing banks, encode datasets, evaluate, benchmark.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pdh/commands.hpp"
#include "pdh/error.hpp"

namespace {

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> sets;
    std::string scheme, pooling, data, out;
    std::optional<std::size_t> bits;
    std::optional<int> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> batch;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("-c,--config", o.config_file, "key=value configuration file");
    sub->add_option("--set", o.sets, "override any configuration key (key=value), repeatable");
    sub->add_option("--scheme", o.scheme, "partition scheme (EQL3, UnEQL3, Overlap3, EQL4, UnEQL4, Overlap4, EQL5, WHOLE)");
    sub->add_option("--bits", o.bits, "hash bits per part");
    sub->add_option("--epochs", o.epochs, "training epochs");
    sub->add_option("--lr", o.lr, "learning rate");
    sub->add_option("--batch", o.batch, "triplets per SGD step");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--pooling", o.pooling, "query pooling: single, avg or max");
    sub->add_option("--data", o.data, "Market-1501 style directory (default: synthetic data)");
    sub->add_option("-o,--out", o.out, "output directory");
}

pdh::RunConfig resolve(const CommonOptions& o) {
    pdh::RunConfig cfg;
    if (!o.config_file.empty()) pdh::apply_config_file(cfg, o.config_file);
    for (const std::string& s : o.sets) {
        const auto [k, v] = pdh::split_assignment(s);
        cfg.set(k, v);
    }
    if (!o.scheme.empty()) cfg.set("scheme", o.scheme);
    if (o.bits) cfg.bits = *o.bits;
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.lr) cfg.train.lr = *o.lr;
    if (o.batch) cfg.train.batch_size = *o.batch;
    if (o.seed) cfg.train.seed = *o.seed;
    if (!o.pooling.empty()) cfg.set("pooling", o.pooling);
    if (!o.data.empty()) cfg.set("data", o.data);
    if (!o.out.empty()) cfg.set("out", o.out);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Part-based deep hashing for person re-identification"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string bank_dir, codes_dir;
    std::size_t bench_n = 100000, bench_bits = 2048, bench_repeats = 20;
    bool no_float = false, print_config = false;

    auto* train = app.add_subcommand("train", "train a part model bank");
    add_common(train, opts);
    train->add_flag("--print-config", print_config, "print the resolved configuration and exit");

    auto* encode = app.add_subcommand("encode", "encode query and gallery images to hash codes");
    add_common(encode, opts);
    encode->add_option("--bank", bank_dir, "bank directory (default: <out>/bank)");

    auto* eval = app.add_subcommand("eval", "CMC and mAP from encoded query and gallery sets");
    add_common(eval, opts);
    eval->add_option("--codes", codes_dir, "code directory (default: <out>/codes)");

    auto* bench = app.add_subcommand("bench", "time Hamming ranking against float Euclidean ranking");
    add_common(bench, opts);
    bench->add_option("-n,--gallery", bench_n, "gallery size");
    bench->add_option("-L,--code-bits", bench_bits, "code length in bits");
    bench->add_option("-r,--repeats", bench_repeats, "queries timed");
    bench->add_flag("--no-float", no_float, "skip the float pipeline");

    auto* synth = app.add_subcommand("synth", "write the synthetic dataset as a Market-style directory");
    add_common(synth, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(pdh::ErrorKind::Configuration);
    }

    try {
        const pdh::RunConfig cfg = resolve(opts);
        if (train->parsed()) {
            if (print_config) {
                std::cout << cfg.to_text();
                return 0;
            }
            pdh::cmd_train(cfg, &std::cerr);
        } else if (encode->parsed()) {
            pdh::cmd_encode(cfg, bank_dir, &std::cerr);
        } else if (eval->parsed()) {
            const pdh::EvalReport r = pdh::cmd_eval(cfg, codes_dir, nullptr);
            std::cout << pdh::summary_line(r) << "\n";
        } else if (bench->parsed()) {
            pdh::cmd_bench(cfg, bench_n, bench_bits, bench_repeats, std::cout, !no_float);
        } else if (synth->parsed()) {
            pdh::cmd_synth(cfg, &std::cerr);
        }
    } catch (const pdh::Error& e) {
        std::cerr << "pdh: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "pdh: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
