// Command-line front end: train, eval, predict, inspect-memory, ablate, synth.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hcner/checkpoint.hpp"
#include "hcner/synthetic.hpp"
#include "hcner/trainer.hpp"

namespace fs = std::filesystem;
using namespace hcner;

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kData = 2, kNumeric = 3 };

// Flags that map one-to-one onto config keys.
struct FlagMap {
  const char* flag;
  const char* key;
  const char* help;
};

const std::vector<FlagMap> kConfigFlags{
    {"--sentence", "sentence", "sentence level: off|mean|label-attn"},
    {"--attn-kernel", "attn_kernel", "odd window of the label attention"},
    {"--label-input", "label_input", "compare labels with: word|joint"},
    {"--aux-label-loss", "aux_label_loss", "auxiliary word-label loss: true|false"},
    {"--document", "document", "document memory: off|on"},
    {"--compat", "compat", "memory compatibility: dot|scaled|cosine"},
    {"--lambda", "lambda", "fusion weight of the encoder state"},
    {"--max-memory", "max_memory", "max memory slots per query (0 = all)"},
    {"--exclude-self", "exclude_self", "drop the querying occurrence: true|false"},
    {"--seed", "seed", "run seed"},
    {"--epochs", "epochs", "training epochs"},
    {"--batch-size", "batch_size", "sentences per update"},
    {"--lr-schedule", "lr_schedule", "multiplicative|inverse"},
    {"--word-dim", "word_dim", "word embedding size"},
    {"--hidden-main", "hidden_main", "main BiLSTM size"},
    {"--hidden-sent", "hidden_sent", "sentence BiLSTM size"},
    {"--dropout", "dropout", "dropout rate"},
    {"--scheme", "scheme", "tag scheme inside the model: BIO|BIOES"},
    {"--train", "train", "training corpus (CoNLL)"},
    {"--dev", "dev", "development corpus (CoNLL)"},
    {"--test", "test", "test corpus (CoNLL)"},
    {"--embeddings", "embeddings", "word embedding text file"},
};

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> values = std::vector<std::string>(kConfigFlags.size());
  std::vector<CLI::Option*> options;
  std::vector<std::string> settings;  // --set key=value
  bool random_embeddings = false;
};

void add_config_flags(CLI::App& cmd, ConfigArgs& args) {
  cmd.add_option("--config", args.config_path, "key=value run-config file");
  for (std::size_t i = 0; i < kConfigFlags.size(); ++i)
    args.options.push_back(cmd.add_option(kConfigFlags[i].flag, args.values[i], kConfigFlags[i].help));
  cmd.add_option("--set", args.settings, "extra key=value config entries");
  cmd.add_flag("--random-embeddings", args.random_embeddings, "train without an embedding file");
}

TrainConfig resolve_config(const ConfigArgs& args) {
  TrainConfig c;
  if (!args.config_path.empty()) c = load_config(args.config_path);
  for (std::size_t i = 0; i < kConfigFlags.size(); ++i) {
    if (args.options[i]->count() == 0) continue;
    std::string value = args.values[i];
    // Ablation spelling of the document switch.
    if (std::string_view(kConfigFlags[i].key) == "document") value = value == "on" ? "true" : value == "off" ? "false" : value;
    apply_setting(c, kConfigFlags[i].key, value);
  }
  for (const auto& kv : args.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.embeddings_path.empty() && !args.random_embeddings)
    throw ConfigError("no embeddings file given (pass --embeddings, or --random-embeddings to train without one)");
  if (args.random_embeddings) c.embeddings_path.clear();
  if (!c.embeddings_path.empty() && !fs::exists(c.embeddings_path))
    throw ConfigError("embeddings file not found: " + c.embeddings_path);
  c.validate();
  return c;
}

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) h = (h ^ b) * 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::string command_line(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) out += (i ? " " : "") + std::string(argv[i]);
  return out;
}

struct RunOutcome {
  TrainResult result;
  std::optional<Evaluation> test;
  std::vector<std::vector<std::string>> test_predictions;
};

RunOutcome run_training(const TrainConfig& config, const Datasets& data, bool verbose) {
  RunOutcome out;
  TrainHooks hooks;
  if (verbose)
    hooks.on_epoch = [](const EpochMetrics& m) {
      std::fprintf(stderr, "epoch %3d  lr %.6f  loss %12.4f  dev F1 %6.2f  (%.1fs)\n", m.epoch, m.lr, m.loss,
                   m.dev.f1(), m.seconds);
    };
  out.result = train(config, data, hooks);
  if (!data.test.empty()) {
    const Model<float> best = restore_model(out.result.best);
    out.test_predictions = predict_corpus(best, data.test);
    out.test = evaluate(gold_bio(data.test), out.test_predictions, TagScheme::BIO);
  }
  return out;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const ConfigArgs& args, const std::string& out_dir, const std::string& cmdline) {
  const TrainConfig config = resolve_config(args);
  const Datasets data = load_datasets(config);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  const auto start = std::chrono::steady_clock::now();
  RunOutcome run = run_training(config, data, true);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string bytes = serialize_checkpoint(run.result.best);
  {
    std::ofstream ck(dir / "model.ckpt", std::ios::binary);
    ck.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!ck) throw DataError("cannot write checkpoint in " + out_dir);
  }
  write_text(dir / "config.txt", to_kv(config));
  {
    std::ostringstream m;
    write_epoch_metrics(m, run.result.history);
    write_text(dir / "metrics.txt", m.str());
  }
  if (run.test) {
    std::ostringstream m;
    m << "best_epoch=" << run.result.best_epoch << '\n';
    write_metrics(m, *run.test, "test.");
    write_text(dir / "test_metrics.txt", m.str());
    Corpus predicted = data.test;
    for (std::size_t s = 0; s < predicted.size(); ++s) {
      predicted.sentences[s].scheme = TagScheme::BIO;
      for (std::size_t i = 0; i < predicted.sentences[s].size(); ++i)
        predicted.sentences[s].tokens[i].tag = run.test_predictions[s][i];
    }
    std::ofstream pred(dir / "test_predictions.txt");
    write_conll(pred, predicted);
    std::cout << format_evaluation(*run.test);
  }

  std::ostringstream manifest;
  manifest << "command=" << cmdline << '\n'
           << "seed=" << config.seed << '\n'
           << "checkpoint=model.ckpt\n"
           << "checkpoint_fnv1a64=" << fnv1a64(bytes) << '\n'
           << "best_epoch=" << run.result.best_epoch << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", total);
  manifest << "total_seconds=" << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.3f", run.result.train_seconds);
  manifest << "train_seconds=" << buf << '\n';
  for (const auto& m : run.result.history) {
    std::snprintf(buf, sizeof buf, "%.3f", m.seconds);
    manifest << "epoch_seconds." << m.epoch << '=' << buf << '\n';
  }
  manifest << "# resolved config\n" << to_kv(config);
  write_text(dir / "manifest.txt", manifest.str());
  std::cerr << "wrote " << (dir / "model.ckpt").string() << '\n';
  return kOk;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& embeddings,
             const std::string& metrics_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Model<float> model = restore_model(ckpt);
  Corpus corpus = read_conll(data_path);
  validate_corpus(corpus);
  const auto gold = gold_bio(corpus);
  const auto pred = predict_corpus(model, corpus);
  const Evaluation eval = evaluate(gold, pred, TagScheme::BIO);

  const auto& v = ckpt.vocabs;
  Vocab train_vocab, emb_vocab;
  for (int id = 2; id < v.words.size(); ++id) {
    if (v.in_train[static_cast<std::size_t>(id)]) train_vocab.add(v.words.word(id));
    if (embeddings.empty() && v.pretrained[static_cast<std::size_t>(id)]) emb_vocab.add(v.words.word(id));
  }
  for (int id = 2; id < v.memory_words.size(); ++id) train_vocab.add(v.memory_words.word(id));
  if (!embeddings.empty())
    for (const auto& w : embedding_words(embeddings, ckpt.config.model.norm)) emb_vocab.add(w);
  const OovBreakdown oov = oov_breakdown(corpus, train_vocab, emb_vocab, gold, pred, ckpt.config.model.norm);

  std::cout << format_evaluation(eval) << '\n' << format_oov(oov) << '\n' << conlleval_report(eval);
  if (!metrics_path.empty()) {
    std::ostringstream m;
    write_metrics(m, eval);
    write_metrics(m, oov);
    write_text(metrics_path, m.str());
  }
  return kOk;
}

// ---- predict --------------------------------------------------------------

int cmd_predict(const std::string& ckpt_path, const std::string& input, bool plain, const std::string& output) {
  const Model<float> model = restore_model(load_checkpoint(ckpt_path));
  Corpus corpus;
  if (plain) {
    std::ifstream in(input);
    if (!in) throw DataError("cannot open " + input);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream words(line);
      Sentence s;
      for (std::string w; words >> w;) s.tokens.push_back(make_token(w, ""));
      if (!s.tokens.empty()) corpus.sentences.push_back(std::move(s));
    }
  } else {
    corpus = read_conll(input);
  }
  const auto pred = predict_corpus(model, corpus);
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    corpus.sentences[s].scheme = TagScheme::BIO;
    for (std::size_t i = 0; i < corpus.sentences[s].size(); ++i) corpus.sentences[s].tokens[i].tag = pred[s][i];
  }
  if (output.empty()) {
    write_conll(std::cout, corpus);
  } else {
    write_conll(output, corpus);
  }
  return kOk;
}

// ---- inspect-memory -------------------------------------------------------

int cmd_inspect(const std::string& ckpt_path, const std::string& word) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::string key = normalize_word(word, ckpt.config.model.norm);
  const auto& mem = ckpt.memory;
  if (!ckpt.vocabs.memory_words.contains(key) || mem.slot_count() == 0) {
    std::cout << word << ": no slots\n";
    return kOk;
  }
  const auto slots = mem.slots_of(ckpt.vocabs.memory_words.lookup(key));
  std::cout << word << ": [";
  for (std::size_t i = 0; i < slots.size(); ++i) std::cout << (i ? ", " : "") << slots[i];
  std::cout << "]\n";

  // Map slots back to (sentence, position) through the stored context.
  std::vector<std::size_t> starts;
  std::size_t total = 0;
  for (const auto& s : ckpt.context) {
    starts.push_back(total);
    total += s.size();
  }
  for (std::size_t slot : slots) {
    std::cout << "  slot " << slot << (mem.initialized(slot) ? "" : " (unwritten)") << ": ";
    if (total != mem.slot_count()) {
      std::cout << "(no context stored)\n";
      continue;
    }
    const auto it = std::upper_bound(starts.begin(), starts.end(), slot);
    const auto sent = static_cast<std::size_t>(it - starts.begin()) - 1;
    const auto& tokens = ckpt.context[sent];
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::size_t global = starts[sent] + i;
      std::cout << (i ? " " : "") << tokens[i];
      if (global == slot) std::cout << " (" << global << ")";
    }
    std::cout << '\n';
  }
  return kOk;
}

// ---- ablate ---------------------------------------------------------------

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_ablate(const ConfigArgs& args, const std::string& out_dir, const std::string& sentences,
               const std::string& documents, const std::string& compats, const std::string& lambdas,
               const std::string& memories) {
  const TrainConfig base = resolve_config(args);
  const Datasets data = load_datasets(base);
  fs::create_directories(out_dir);

  struct Point {
    TrainConfig config;
    double dev = 0, test = 0, epoch_seconds = 0;
  };
  std::vector<Point> points;
  for (const auto& sm : split_list(sentences))
    for (const auto& doc : split_list(documents))
      for (const auto& cp : split_list(compats))
        for (const auto& lm : split_list(lambdas))
          for (const auto& mm : split_list(memories)) {
            TrainConfig c = base;
            apply_setting(c, "sentence", sm);
            apply_setting(c, "document", doc == "on" ? "true" : doc == "off" ? "false" : doc);
            if (c.model.document) {
              apply_setting(c, "compat", cp);
              apply_setting(c, "lambda", lm);
              apply_setting(c, "max_memory", mm);
            }
            c.validate();
            const std::string kv = to_kv(c);
            // Memory-off points ignore the memory axes; run each once.
            if (std::any_of(points.begin(), points.end(), [&](const Point& p) { return to_kv(p.config) == kv; }))
              continue;
            points.push_back({c});
          }
  // Every sentence setting needs a memory-off reference for the time ratio.
  for (std::size_t i = 0, n = points.size(); i < n; ++i) {
    TrainConfig ref = points[i].config;
    ref.model.document = false;
    ref.model.compat = base.model.compat;
    ref.model.lambda = base.model.lambda;
    ref.model.max_memory = base.model.max_memory;
    if (std::none_of(points.begin(), points.end(), [&](const Point& p) {
          return !p.config.model.document && p.config.model.sentence == ref.model.sentence;
        }))
      points.push_back({ref});
  }

  for (auto& p : points) {
    std::fprintf(stderr, "ablate: sentence=%s document=%s compat=%s lambda=%g max_memory=%d\n",
                 std::string(to_string(p.config.model.sentence)).c_str(), p.config.model.document ? "on" : "off",
                 std::string(to_string(p.config.model.compat)).c_str(), p.config.model.lambda,
                 p.config.model.max_memory);
    const RunOutcome run = run_training(p.config, data, false);
    for (const auto& m : run.result.history) p.dev = std::max(p.dev, m.dev.f1());
    p.test = run.test ? run.test->overall.f1() : 0.0;
    p.epoch_seconds = run.result.history.empty() ? 0.0 : run.result.train_seconds / run.result.history.size();
  }

  std::ostringstream csv, table;
  csv << "sentence,document,compat,lambda,max_memory,dev_f1,test_f1,epoch_seconds,time_ratio\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-8s %-7s %6s %6s %8s %8s %8s\n", "sentence", "document", "compat", "lambda",
                "T_max", "dev F1", "test F1", "time x");
  table << buf;
  for (const auto& p : points) {
    double ref = 0.0;
    for (const auto& q : points)
      if (!q.config.model.document && q.config.model.sentence == p.config.model.sentence) ref = q.epoch_seconds;
    const double ratio = ref > 0 ? p.epoch_seconds / ref : 0.0;
    const auto& m = p.config.model;
    const std::string sm(to_string(m.sentence)), cp(m.document ? to_string(m.compat) : "-");
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%g,%d,%.2f,%.2f,%.4f,%.4f\n", sm.c_str(), m.document ? "on" : "off",
                  cp.c_str(), m.lambda, m.max_memory, p.dev, p.test, p.epoch_seconds, ratio);
    csv << buf;
    std::snprintf(buf, sizeof buf, "%-10s %-8s %-7s %6g %6d %8.2f %8.2f %8.3f\n", sm.c_str(),
                  m.document ? "on" : "off", cp.c_str(), m.lambda, m.max_memory, p.dev, p.test, ratio);
    table << buf;
  }
  write_text(fs::path(out_dir) / "ablation.csv", csv.str());
  write_text(fs::path(out_dir) / "ablation.txt", table.str());
  std::cout << table.str();
  return kOk;
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const std::string& out_dir, const SyntheticConfig& cfg) {
  const SyntheticCorpus data = generate_synthetic(cfg);
  write_synthetic(out_dir, data);
  std::cout << "train " << data.train.size() << " / dev " << data.dev.size() << " / test " << data.test.size()
            << " sentences; " << data.ambiguous.size() << " ambiguous names\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchically contextualized named entity recognition"};
  app.require_subcommand(1);

  ConfigArgs train_args;
  std::string out_dir = "run";
  auto* train = app.add_subcommand("train", "train a model and write checkpoint, metrics and manifest");
  add_config_flags(*train, train_args);
  train->add_option("--out-dir", out_dir, "output directory");

  std::string ckpt, data, embeddings, metrics;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a labeled corpus");
  eval->add_option("--checkpoint", ckpt)->required();
  eval->add_option("--data", data, "labeled CoNLL corpus")->required();
  eval->add_option("--embeddings", embeddings, "embedding file for the OOV breakdown");
  eval->add_option("--metrics", metrics, "write key=value metrics here");

  std::string input, output;
  bool plain = false;
  auto* predict = app.add_subcommand("predict", "tag a corpus; output is CoNLL columns in BIO");
  predict->add_option("--checkpoint", ckpt)->required();
  predict->add_option("--input", input)->required();
  predict->add_flag("--plain", plain, "input has one whitespace-tokenized sentence per line");
  predict->add_option("--output", output);

  std::string word;
  auto* inspect = app.add_subcommand("inspect-memory", "show the memory slots of a word");
  inspect->add_option("--checkpoint", ckpt)->required();
  inspect->add_option("word", word)->required();

  ConfigArgs ablate_args;
  std::string sentences = "off,mean,label-attn", documents = "off,on", compats = "cosine", lambdas = "0.3",
              memories = "500";
  auto* ablate = app.add_subcommand("ablate", "train a grid of configurations; writes ablation.csv");
  add_config_flags(*ablate, ablate_args);
  ablate->add_option("--out-dir", out_dir);
  ablate->add_option("--sentences", sentences, "comma list of sentence modes");
  ablate->add_option("--documents", documents, "comma list of off/on");
  ablate->add_option("--compats", compats, "comma list of compatibility functions");
  ablate->add_option("--lambdas", lambdas, "comma list of fusion weights");
  ablate->add_option("--max-memories", memories, "comma list of T_max values");

  SyntheticConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "write the synthetic corpus");
  synth->add_option("--out-dir", out_dir);
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--train-size", synth_cfg.train_sentences);
  synth->add_option("--dev-size", synth_cfg.dev_sentences);
  synth->add_option("--test-size", synth_cfg.test_sentences);
  synth->add_option("--embedding-dim", synth_cfg.embedding_dim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train) return cmd_train(train_args, out_dir, command_line(argc, argv));
    if (*eval) return cmd_eval(ckpt, data, embeddings, metrics);
    if (*predict) return cmd_predict(ckpt, input, plain, output);
    if (*inspect) return cmd_inspect(ckpt, word);
    if (*ablate) return cmd_ablate(ablate_args, out_dir, sentences, documents, compats, lambdas, memories);
    if (*synth) return cmd_synth(out_dir, synth_cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
