#include "sebench/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sebench/bayes.hpp"
#include "sebench/corpus.hpp"
#include "sebench/eval.hpp"
#include "sebench/mlm.hpp"
#include "sebench/pretrain.hpp"
#include "sebench/service.hpp"
#include "sebench/text.hpp"
#include "sebench/vocab_analysis.hpp"
#include "sebench/wordpiece.hpp"

namespace sebench::cli {

namespace {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, std::string_view content) {
  auto out = open_out(path);
  out << content;
  if (!content.empty() && content.back() != '\n') out << '\n';
}

pretrain::Corpus load_corpus(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return corpus::read_corpus(in);
}

// --backend baseline:<corpus> | baseline:<name>=<corpus> | http:<name>=<url>
std::shared_ptr<const mlm::MlmBackend> parse_mlm_backend(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("backend spec '" + spec + "' needs a kind prefix");
  const std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  const auto eq = rest.find('=');
  if (kind == "baseline") {
    const std::string name = eq == std::string::npos ? "baseline" : rest.substr(0, eq);
    const std::string path = eq == std::string::npos ? rest : rest.substr(eq + 1);
    if (path.empty()) throw ConfigError("baseline backend needs a corpus path");
    return std::make_shared<mlm::BaselineBackend>(name, read_lines(path));
  }
  if (kind == "http") {
    if (eq == std::string::npos || eq == 0) throw ConfigError("http backend must be given as http:<name>=<url>");
    return std::make_shared<mlm::HttpBackend>(rest.substr(0, eq), rest.substr(eq + 1));
  }
  throw ConfigError("unknown backend kind '" + kind + "' (expected baseline or http)");
}

std::string ends_with_lower(const std::string& s, std::size_t n) {
  std::string tail = s.size() >= n ? s.substr(s.size() - n) : s;
  for (char& c : tail) c = text::ascii_lower(c);
  return tail;
}

service::Server* g_server = nullptr;

extern "C" void handle_stop_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Software-engineering language model toolkit", "sebench"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // preprocess
  struct {
    std::string in, out, config, report;
    std::size_t threads = 1;
  } pre;
  auto* c_pre = app.add_subcommand("preprocess", "Clean a JSON-lines corpus into sentences");
  c_pre->add_option("--in", pre.in, "Input JSON-lines documents")->required();
  c_pre->add_option("--out", pre.out, "Output corpus (one sentence per line)")->required();
  c_pre->add_option("--config", pre.config, "Pipeline config (JSON)")->required();
  c_pre->add_option("--report", pre.report, "Write the run report here");
  c_pre->add_option("--threads", pre.threads, "Worker threads")->check(CLI::PositiveNumber);

  // train-vocab
  struct {
    std::string in, out;
    std::size_t size = 30522;
    std::size_t min_frequency = 2;
  } tv;
  auto* c_tv = app.add_subcommand("train-vocab", "Train a WordPiece vocabulary");
  c_tv->add_option("--in", tv.in, "Cleaned corpus")->required();
  c_tv->add_option("--size", tv.size, "Vocabulary size")->required();
  c_tv->add_option("--out", tv.out, "Output vocab.txt")->required();
  c_tv->add_option("--min-frequency", tv.min_frequency, "Minimum pair frequency for a merge");

  // tokenize
  struct {
    std::string vocab, text;
    bool cased = false;
  } tok;
  auto* c_tok = app.add_subcommand("tokenize", "Tokenize text with a vocabulary");
  c_tok->add_option("--vocab", tok.vocab, "vocab.txt")->required();
  c_tok->add_option("--text", tok.text, "Text to tokenize")->required();
  c_tok->add_flag("--cased", tok.cased, "Keep case and accents");

  // prep
  struct {
    std::string in, vocab, out;
    pretrain::PrepOptions opts;
  } prep;
  auto* c_prep = app.add_subcommand("prep", "Build masked pre-training instances");
  c_prep->add_option("--in", prep.in, "Cleaned corpus")->required();
  c_prep->add_option("--vocab", prep.vocab, "vocab.txt")->required();
  c_prep->add_option("--max-len", prep.opts.max_seq_len, "Maximum sequence length");
  c_prep->add_option("--dupe", prep.opts.dupe_factor, "Dupe factor");
  c_prep->add_option("--seed", prep.opts.seed, "Random seed");
  c_prep->add_option("--mask-prob", prep.opts.mask_prob, "Share of words to mask");
  c_prep->add_option("--out", prep.out, "Output JSON-lines")->required();

  // stats
  struct {
    std::string in, vocab, out;
  } st;
  auto* c_st = app.add_subcommand("stats", "Sequence-length histogram");
  c_st->add_option("--in", st.in, "Cleaned corpus")->required();
  c_st->add_option("--vocab", st.vocab, "vocab.txt")->required();
  c_st->add_option("--out", st.out, "Output JSON")->required();

  // analyze-vocab
  struct {
    std::string a, b, out, markdown;
    bool uncase_b = false;
    std::size_t examples = 20;
  } av;
  auto* c_av = app.add_subcommand("analyze-vocab", "Compare two vocabularies");
  c_av->add_option("--a", av.a, "First vocab.txt")->required();
  c_av->add_option("--b", av.b, "Second vocab.txt")->required();
  c_av->add_flag("--uncase-b", av.uncase_b, "Lowercase the second vocabulary before comparing");
  c_av->add_option("--out", av.out, "Output JSON")->required();
  c_av->add_option("--markdown", av.markdown, "Also write a Markdown table here");
  c_av->add_option("--examples", av.examples, "Rows per list in the outputs");

  // mlm-run
  struct {
    std::string examples, out;
    std::vector<std::string> backends;
    mlm::RunOptions opts;
    std::string format = "auto";
  } mr;
  auto* c_mr = app.add_subcommand("mlm-run", "Run the masked-word benchmark");
  c_mr->add_option("--examples", mr.examples, "Examples JSON")->required();
  c_mr->add_option("--backend", mr.backends, "baseline:<corpus> or http:<name>=<url>; repeatable")->required();
  c_mr->add_option("--top-k", mr.opts.top_k, "Predictions per example")->check(CLI::PositiveNumber);
  c_mr->add_option("--max-in-flight", mr.opts.max_in_flight, "Concurrent requests")->check(CLI::PositiveNumber);
  c_mr->add_option("--format", mr.format, "markdown, json or auto (by extension)")
      ->check(CLI::IsMember({"auto", "markdown", "json"}));
  c_mr->add_option("--out", mr.out, "Report path")->required();

  // eval
  struct {
    std::string data, scheme, backend, out, positive;
    eval::EvalOptions opts;
  } ev;
  auto* c_ev = app.add_subcommand("eval", "Cross-validate a classifier backend");
  c_ev->add_option("--data", ev.data, "Labeled JSON-lines")->required();
  c_ev->add_option("--scheme", ev.scheme, "lopo or 10x10")->required();
  c_ev->add_option("--backend", ev.backend, "majority, unigram or cmd:<exe>")->required();
  c_ev->add_option("--seed", ev.opts.seed, "Random seed");
  c_ev->add_option("--repeats", ev.opts.repeats, "CV repetitions");
  c_ev->add_option("--folds", ev.opts.folds, "CV folds");
  c_ev->add_option("--parallel", ev.opts.max_parallel, "Folds trained at once")->check(CLI::PositiveNumber);
  c_ev->add_option("--positive-label", ev.positive, "Label whose F1 is the headline metric");
  c_ev->add_option("--out", ev.out, "Results JSON")->required();

  // compare
  struct {
    std::string a, b, out, metric = "f1", method, rope;
    double rho = 0.1;
    bayes::SignedRankOptions sr;
  } cmp;
  auto* c_cmp = app.add_subcommand("compare", "Bayesian comparison of two result files");
  c_cmp->add_option("--a", cmp.a, "Results of classifier A")->required();
  c_cmp->add_option("--b", cmp.b, "Results of classifier B")->required();
  c_cmp->add_option("--metric", cmp.metric, "f1, precision, recall or macro_*");
  c_cmp->add_option("--method", cmp.method, "signed-rank or corr-t")->required();
  c_cmp->add_option("--rope", cmp.rope, "Region of practical equivalence LO,HI")->required();
  c_cmp->add_option("--rho", cmp.rho, "Correlation for corr-t");
  c_cmp->add_option("--samples", cmp.sr.mc_samples, "Monte Carlo samples for signed-rank");
  c_cmp->add_option("--seed", cmp.sr.seed, "Seed for signed-rank");
  c_cmp->add_option("--threads", cmp.sr.threads, "Worker threads for signed-rank")->check(CLI::PositiveNumber);
  c_cmp->add_option("--out", cmp.out, "Posterior JSON")->required();

  // serve
  std::string serve_config;
  auto* c_srv = app.add_subcommand("serve", "Run the HTTP prediction service");
  c_srv->add_option("--config", serve_config, "Service config (JSON)")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kExitOk;
    }
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (c_pre->parsed()) {
      std::ifstream in(pre.in, std::ios::binary);
      if (!in) throw InputError("cannot open " + pre.in);
      const auto docs = corpus::read_documents(in);
      auto config = corpus::PipelineConfig::from_json_text(read_text(pre.config));
      config.threads = pre.threads;
      config.validate();
      const corpus::StopwordDetector detector(config.english_threshold);
      corpus::PipelineReport report;
      const auto cleaned = corpus::run_corpus(docs, config, detector, &report);
      auto o = open_out(pre.out);
      corpus::write_corpus(o, cleaned);
      if (!pre.report.empty()) write_text(pre.report, report.to_json());
      err << "preprocess: kept " << report.kept << " of " << report.documents << " documents, " << report.sentences
          << " sentences\n";
    } else if (c_tv->parsed()) {
      std::vector<std::string> sentences;
      for (auto& line : read_lines(tv.in)) {
        if (!text::trim(line).empty()) sentences.push_back(std::move(line));
      }
      wordpiece::TrainOptions opts;
      opts.target_size = tv.size;
      opts.min_frequency = tv.min_frequency;
      wordpiece::train_vocab(sentences, opts).save(tv.out);
    } else if (c_tok->parsed()) {
      const wordpiece::Tokenizer t(wordpiece::Vocabulary::load(tok.vocab), {tok.cased, 100});
      out << text::join(t.tokenize(tok.text), " ") << '\n';
    } else if (c_prep->parsed()) {
      const wordpiece::Tokenizer t(wordpiece::Vocabulary::load(prep.vocab));
      const auto instances = pretrain::make_instances(load_corpus(prep.in), t, prep.opts);
      auto o = open_out(prep.out);
      for (const auto& inst : instances) o << pretrain::instance_to_json(inst) << '\n';
      err << "prep: wrote " << instances.size() << " instances\n";
    } else if (c_st->parsed()) {
      const wordpiece::Tokenizer t(wordpiece::Vocabulary::load(st.vocab));
      write_text(st.out, pretrain::length_stats(load_corpus(st.in), t).to_json());
    } else if (c_av->parsed()) {
      const auto a = wordpiece::Vocabulary::load(av.a);
      const auto b = wordpiece::Vocabulary::load(av.b);
      const auto report = vocab_analysis::analyze(a, b, av.uncase_b);
      write_text(av.out, vocab_analysis::to_json(report, av.examples));
      if (!av.markdown.empty()) {
        write_text(av.markdown, vocab_analysis::render_markdown(report.a_not_in_b, report.b_not_in_a, av.examples));
      }
    } else if (c_mr->parsed()) {
      const auto examples = mlm::load_examples(mr.examples);
      std::vector<std::shared_ptr<const mlm::MlmBackend>> backends;
      for (const auto& spec : mr.backends) backends.push_back(parse_mlm_backend(spec));
      const auto result = mlm::run_benchmark(examples, backends, mr.opts);
      const bool json = mr.format == "json" || (mr.format == "auto" && ends_with_lower(mr.out, 5) == ".json");
      write_text(mr.out, mlm::render_report(result, json ? mlm::ReportFormat::json : mlm::ReportFormat::markdown));
      std::size_t failed = 0;
      for (const auto& o : result.outcomes) failed += o.predictions ? 0 : 1;
      if (failed > 0) err << "mlm-run: " << failed << " predictions failed\n";
    } else if (c_ev->parsed()) {
      auto data = eval::load_dataset(ev.data);
      if (!ev.positive.empty()) data.positive_label = ev.positive;
      ev.opts.scheme = eval::parse_scheme(ev.scheme);
      const auto backend = eval::make_backend(ev.backend);
      eval::EvalRun run;
      run.scheme = std::string(eval::to_string(ev.opts.scheme));
      run.backend = backend->name();
      run.seed = ev.opts.seed;
      run.label_set = data.label_set;
      run.positive_label = data.positive_label;
      run.folds = eval::run_eval(data, *backend, ev.opts);
      write_text(ev.out, eval::results_to_json(run));
      std::size_t failed = 0;
      for (const auto& f : run.folds) failed += f.failed ? 1 : 0;
      if (failed > 0) err << "eval: " << failed << " of " << run.folds.size() << " folds failed\n";
    } else if (c_cmp->parsed()) {
      const auto a = eval::results_from_json(read_text(cmp.a));
      const auto b = eval::results_from_json(read_text(cmp.b));
      const auto method = bayes::parse_method(cmp.method);
      const auto rope = bayes::parse_rope(cmp.rope);
      const auto d = bayes::paired_differences(a, b, cmp.metric);
      const auto summary = method == bayes::Method::correlated_t ? bayes::correlated_t_test(d, rope, cmp.rho)
                                                                 : bayes::signed_rank_test(d, rope, cmp.sr);
      write_text(cmp.out, bayes::to_json(summary));
    } else if (c_srv->parsed()) {
      auto config = service::ServiceConfig::load(serve_config);
      config.apply_env();
      const auto svc = service::Service::from_config(config);
      service::Server server(svc);
      const int port = server.bind(config.host, config.port);
      err << "serve: listening on " << config.host << ':' << port << '\n' << std::flush;
      g_server = &server;
      std::signal(SIGINT, handle_stop_signal);
      std::signal(SIGTERM, handle_stop_signal);
      server.run();
      g_server = nullptr;
    }
  } catch (const ConfigError& e) {
    err << "sebench: config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputError& e) {
    err << "sebench: input error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const BackendError& e) {
    err << "sebench: backend error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "sebench: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace sebench::cli
