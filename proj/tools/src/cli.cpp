#include "tracemark/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "tracemark/acpt.hpp"
#include "tracemark/error.hpp"
#include "tracemark/gateway.hpp"
#include "tracemark/ledger.hpp"
#include "tracemark/media.hpp"
#include "tracemark/nn.hpp"
#include "tracemark/pcpt.hpp"
#include "tracemark/phash.hpp"
#include "tracemark/random.hpp"
#include "tracemark/synth.hpp"

namespace tracemark::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

fs::path resolve(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (const char* root = std::getenv(kWorkspaceEnv); root != nullptr && *root != '\0') return fs::path(root) / path;
  }
  return path;
}

void emit(std::ostream& out, const Json& record) { out << record.dump() << "\n"; }

Json accuracy_map(const std::map<std::string, double>& m) {
  Json j = Json::object();
  for (const auto& [user, acc] : m) j[user] = acc;
  return j;
}

RgbImage load_image(const std::string& p) { return media::read_pnm(resolve(p)); }

nn::LabeledDataset load_data(const std::string& images, const std::string& labels) {
  return nn::load_idx(resolve(images), resolve(labels));
}

std::vector<media::TriggerSet> load_sets(const std::vector<std::string>& dirs) {
  std::vector<media::TriggerSet> sets;
  for (const auto& d : dirs) sets.push_back(media::load_trigger_set(resolve(d)));
  return sets;
}

std::vector<RgbImage> load_images_from(const std::vector<std::string>& dirs) {
  std::vector<RgbImage> all;
  for (const auto& d : dirs) {
    for (auto& f : media::load_frame_dir(resolve(d)).frames) all.push_back(std::move(f));
  }
  return all;
}

void write_images(const fs::path& dir, const std::vector<RgbImage>& images) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::ostringstream name;
    name << std::setw(3) << std::setfill('0') << i << ".ppm";
    media::write_ppm(dir / name.str(), images[i]);
  }
}

void add_thresholds(CLI::App* cmd, pcpt::TraceThresholds& t) {
  cmd->add_option("--theta1", t.theta1, "Own-trigger accuracy threshold")->capture_default_str();
  cmd->add_option("--theta2", t.theta2, "Other-trigger accuracy threshold")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, nn::TrainConfig& cfg) {
  cmd->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", cfg.learning_rate, "SGD learning rate")->capture_default_str();
  cmd->add_option("--momentum", cfg.momentum, "SGD momentum")->capture_default_str();
  cmd->add_option("--batch", cfg.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
}

struct Options {
  // shared
  std::uint64_t seed = 1;
  std::string model, base, watermarked, out, images, labels, test_images, test_labels;
  std::vector<std::string> triggers, positional;
  pcpt::TraceThresholds thresholds;
  nn::TrainConfig train;
  nn::TrainConfig attack;
  double fraction = pcpt::kDefaultFraction;
  std::vector<double> rates;
  bool sweep = false;
  // frames
  std::string input, user;
  std::size_t count = 100, first = 0, frames = 0;
  int d_min = media::kDefaultMinDistance, label = 10;
  // synth
  std::size_t train_count = 12000, test_count = 2000;
  std::string scene = "flashcard-ring", category = "apple";
  int size = 64;
  // ledger
  std::string ledger, owner, fingerprint, note;
  std::vector<std::string> image_list;
  // acpt
  std::string username, owner_fp = "HN", k1, center, key_image, detector, keys, address, credential, query_image,
                        request_id = "1";
  std::vector<std::string> others, probes;
  std::string bind = "127.0.0.1:7070";
  double duration = 0.0;
};

int cmd_phash(const Options& o, std::ostream& out) {
  Json results = Json::array();
  std::vector<phash::PerceptualHash> hashes;
  for (const auto& p : o.positional) {
    const auto h = phash::hash_image(load_image(p));
    hashes.push_back(h);
    out << h.to_hex() << "  " << p << "\n";
    results.push_back(Json{{"path", p}, {"phash", h.to_hex()}});
  }
  Json rec{{"command", "phash"}, {"results", results}};
  if (hashes.size() == 2) {
    const int d = phash::hamming(hashes[0], hashes[1]);
    out << "hamming=" << d << "\n";
    rec["hamming"] = d;
  }
  emit(out, rec);
  return kExitOk;
}

int cmd_frames_select(const Options& o, std::ostream& out) {
  media::FrameSequence seq = media::load_frames(resolve(o.input));
  if (o.first > 0 || o.frames > 0) {
    const std::size_t n = o.frames > 0 ? o.frames : seq.frames.size() - std::min(o.first, seq.frames.size());
    seq = synth::slice(seq, o.first, n);
  }
  const media::TriggerSet set = media::select_triggers(seq, o.count, o.d_min, o.user, o.label);
  media::export_trigger_set(set, resolve(o.out));
  out << "selected " << set.size() << " of " << seq.frames.size() << " frames for " << set.user_id
      << ", min pairwise distance " << set.min_pairwise_distance << "\n";
  emit(out, Json{{"command", "frames select"},
                 {"user_id", set.user_id},
                 {"L", set.size()},
                 {"d_min", set.d_min},
                 {"min_pairwise_distance", set.min_pairwise_distance},
                 {"frame_indices", set.frame_indices},
                 {"out", o.out}});
  return kExitOk;
}

int cmd_train_base(const Options& o, std::ostream& out) {
  const nn::LabeledDataset data = load_data(o.images, o.labels);
  const nn::ModelSnapshot init = nn::desk_cnn(data.shape, data.num_classes, mix_seed(o.train.seed, "init"));
  const nn::TrainResult r = nn::train_with_history(init, data, o.train);
  nn::save(r.model, resolve(o.out));
  Json rec{{"command", "train-base"}, {"items", data.size()}, {"epoch_loss", r.epoch_loss}, {"out", o.out}};
  out << "trained on " << data.size() << " items, final loss " << r.epoch_loss.back() << "\n";
  if (!o.test_images.empty()) {
    const double acc = nn::accuracy(r.model, load_data(o.test_images, o.test_labels));
    out << "test accuracy " << acc << "\n";
    rec["test_accuracy"] = acc;
  }
  emit(out, rec);
  return kExitOk;
}

int cmd_embed(const Options& o, std::ostream& out) {
  const nn::ModelSnapshot base = nn::load(resolve(o.model));
  const nn::LabeledDataset data = load_data(o.images, o.labels);
  const media::TriggerSet set = media::load_trigger_set(resolve(o.triggers.front()));
  const pcpt::EmbedResult r = pcpt::embed_watermark(base, data, set, o.train, o.fraction);
  nn::save(r.model, resolve(o.out));
  out << "embedded " << set.user_id << " as class " << set.label << ", trigger accuracy " << r.trigger_accuracy << "\n";
  emit(out, Json{{"command", "embed"},
                 {"user_id", set.user_id},
                 {"label", set.label},
                 {"trigger_accuracy", r.trigger_accuracy},
                 {"out", o.out}});
  return kExitOk;
}

int emit_trace(const std::string& command, const pcpt::TraceReport& report, std::ostream& out) {
  out << report.to_text();
  Json rec{{"command", command},
           {"per_user_trigger_accuracy", accuracy_map(report.per_user_trigger_accuracy)},
           {"verdict", report.verdict},
           {"traced", report.traced()}};
  if (report.original_task_accuracy) rec["original_task_accuracy"] = *report.original_task_accuracy;
  emit(out, rec);
  return report.traced() ? kExitOk : kExitDomainFailure;
}

int cmd_trace(const Options& o, std::ostream& out) {
  o.thresholds.validate();
  const nn::ModelSnapshot model = nn::load(resolve(o.model));
  pcpt::TraceReport report = pcpt::trace(model, load_sets(o.triggers), o.thresholds);
  if (!o.test_images.empty()) {
    const nn::LabeledDataset test = load_data(o.test_images, o.test_labels);
    report.original_task_accuracy = nn::accuracy(model, test, test.num_classes);
  }
  return emit_trace("trace", report, out);
}

int cmd_fidelity(const Options& o, std::ostream& out) {
  const nn::ModelSnapshot base = nn::load(resolve(o.base));
  const nn::ModelSnapshot wm = nn::load(resolve(o.watermarked));
  const nn::LabeledDataset test = load_data(o.test_images, o.test_labels);
  const double base_acc = nn::accuracy(base, test, test.num_classes);
  const double wm_acc = nn::accuracy(wm, test, test.num_classes);
  const double drop = pcpt::fidelity_report(base, wm, test);
  const double extra = pcpt::additional_class_rate(wm, test);
  out << "base_accuracy=" << base_acc << "\nwatermarked_accuracy=" << wm_acc << "\naccuracy_drop=" << drop
      << "\nadditional_class_rate=" << extra << "\n";
  emit(out, Json{{"command", "fidelity"},
                 {"base_accuracy", base_acc},
                 {"watermarked_accuracy", wm_acc},
                 {"accuracy_drop", drop},
                 {"additional_class_rate", extra}});
  return kExitOk;
}

int cmd_attack_finetune(const Options& o, std::ostream& out) {
  o.thresholds.validate();
  const nn::ModelSnapshot model = nn::load(resolve(o.model));
  const nn::LabeledDataset test = load_data(o.test_images, o.test_labels);
  const pcpt::AttackResult r =
      pcpt::finetune_attack(model, test, load_sets(o.triggers), o.thresholds, o.attack.epochs, o.attack);
  if (!o.out.empty()) nn::save(r.model, resolve(o.out));
  return emit_trace("attack finetune", r.report, out);
}

int cmd_attack_prune(const Options& o, std::ostream& out) {
  o.thresholds.validate();
  std::vector<double> rates = o.rates;
  if (o.sweep) {
    for (int i = 0; i <= 9; ++i) rates.push_back(i / 10.0);
  }
  if (rates.empty()) rates.push_back(0.5);
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) fail(ErrorCode::kInvalidInput, "prune rates must lie in [0, 1]");
  }
  const nn::ModelSnapshot model = nn::load(resolve(o.model));
  const nn::LabeledDataset test = load_data(o.test_images, o.test_labels);
  const auto sets = load_sets(o.triggers);
  const auto rows = pcpt::prune_sweep(model, rates, sets, test, o.thresholds);

  out << std::left << std::setw(6) << "rate" << std::setw(10) << "original";
  for (const auto& s : sets) out << std::setw(12) << s.user_id;
  out << "verdict\n";
  bool all_traced = true;
  for (const auto& row : rows) {
    out << std::fixed << std::setprecision(2) << std::setw(6) << row.rate << std::setprecision(4) << std::setw(10)
        << row.original_accuracy;
    for (const auto& s : sets) out << std::setw(12) << row.trigger_accuracy.at(s.user_id);
    out << row.verdict << "\n";
    out.unsetf(std::ios::floatfield);
    out << std::setprecision(6);
    all_traced = all_traced && row.verdict != pcpt::kTraceFailure;
    emit(out, Json{{"command", "attack prune"},
                   {"rate", row.rate},
                   {"original_accuracy", row.original_accuracy},
                   {"per_user_trigger_accuracy", accuracy_map(row.trigger_accuracy)},
                   {"verdict", row.verdict}});
  }
  return (o.sweep || all_traced) ? kExitOk : kExitDomainFailure;
}

std::vector<RgbImage> ledger_images(const Options& o) {
  std::vector<RgbImage> images;
  for (const auto& set : load_sets(o.triggers)) images.insert(images.end(), set.images.begin(), set.images.end());
  for (const auto& p : o.image_list) images.push_back(load_image(p));
  if (images.empty()) fail(ErrorCode::kInvalidInput, "no trigger images given (--triggers or --image)");
  return images;
}

int cmd_ledger_append(const Options& o, std::ostream& out) {
  const RgbImage fp = load_image(o.fingerprint);
  ledger::Ledger store = ledger::Ledger::open(resolve(o.ledger));
  Json appended = Json::array();
  const auto images = ledger_images(o);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const phash::PerceptualHash p = ledger::fingerprint_bind(images[i], fp);
    const std::string note = o.note.empty() ? "trigger " + std::to_string(i) : o.note + " #" + std::to_string(i);
    const ledger::LedgerRecord rec = store.append(o.owner, p, note);
    out << "seq=" << rec.seq << " owner=" << rec.owner_id << " P=" << rec.p_hex << "\n";
    appended.push_back(Json{{"seq", rec.seq}, {"p_hex", rec.p_hex}});
  }
  emit(out, Json{{"command", "ledger append"}, {"owner_id", o.owner}, {"records", appended}});
  return kExitOk;
}

int cmd_ledger_verify(const Options& o, std::ostream& out) {
  const ledger::ChainStatus st = ledger::verify_chain(resolve(o.ledger));
  Json rec{{"command", "ledger verify"}, {"ok", st.ok}, {"records", st.records}};
  if (st.ok) {
    out << "chain ok, " << st.records << " records\n";
  } else {
    out << "chain broken at seq " << st.first_bad_seq.value_or(0) << ": " << st.reason << "\n";
    rec["first_bad_seq"] = st.first_bad_seq.value_or(0);
    rec["reason"] = st.reason;
  }
  emit(out, rec);
  return st.ok ? kExitOk : kExitDomainFailure;
}

int cmd_ledger_claim(const Options& o, std::ostream& out) {
  const ledger::Ledger store = ledger::Ledger::open(resolve(o.ledger));
  const RgbImage fp = load_image(o.fingerprint);
  const auto images = ledger_images(o);
  Json claims = Json::array();
  bool all_found = true;
  for (const RgbImage& img : images) {
    const phash::PerceptualHash p = ledger::fingerprint_bind(img, fp);
    const auto rec = ledger::verify_ownership(store, img, fp);
    if (rec) {
      out << "P=" << p.to_hex() << " earliest seq=" << rec->seq << " owner=" << rec->owner_id << " at " << rec->timestamp
          << "\n";
      claims.push_back(Json{{"p_hex", p.to_hex()}, {"seq", rec->seq}, {"owner_id", rec->owner_id}, {"timestamp", rec->timestamp}});
    } else {
      out << "P=" << p.to_hex() << " not recorded\n";
      claims.push_back(Json{{"p_hex", p.to_hex()}, {"seq", nullptr}, {"owner_id", nullptr}});
      all_found = false;
    }
  }
  emit(out, Json{{"command", "ledger claim"}, {"claims", claims}});
  return all_found ? kExitOk : kExitDomainFailure;
}

acpt::SelectionKey selection_key(const Options& o) {
  return o.k1.empty() ? acpt::random_k1(o.seed) : acpt::parse_k1(o.k1);
}

int cmd_acpt_credential(const Options& o, std::ostream& out) {
  const acpt::Credential c = acpt::make_credential(o.username, o.owner_fp, selection_key(o));
  out << "username=" << c.username << "\nencrypted_username=" << c.encrypted_username << "\nk1=" << c.k1_string() << "\n";
  emit(out, Json{{"command", "acpt credential"},
                 {"username", c.username},
                 {"encrypted_username", c.encrypted_username},
                 {"k1", c.k1}});
  return kExitOk;
}

int cmd_acpt_detector_train(const Options& o, std::ostream& out) {
  const auto keys = load_images_from({o.keys});
  const auto others = load_images_from(o.others);
  const nn::ModelSnapshot det = acpt::train_detector(keys, others, o.train);
  std::size_t correct = 0;
  for (const auto& k : keys) correct += acpt::detector_accepts(det, k) ? 1 : 0;
  for (const auto& k : others) correct += acpt::detector_accepts(det, k) ? 0 : 1;
  const double acc = static_cast<double>(correct) / static_cast<double>(keys.size() + others.size());
  nn::save(det, resolve(o.out));
  out << "detector trained on " << keys.size() << " key and " << others.size() << " other images, training accuracy "
      << acc << "\n";
  emit(out, Json{{"command", "acpt detector-train"},
                 {"keys", keys.size()},
                 {"others", others.size()},
                 {"training_accuracy", acc},
                 {"out", o.out}});
  return kExitOk;
}

acpt::AuthorizationCenter load_center_or_empty(const fs::path& dir) {
  if (fs::exists(dir / "identities.ndjson")) return acpt::AuthorizationCenter::load(dir);
  return {};
}

int cmd_acpt_enroll(const Options& o, std::ostream& out) {
  const fs::path dir = resolve(o.center);
  acpt::AuthorizationCenter center = load_center_or_empty(dir);
  for (const auto& b : center.bundles) {
    if (b.user_id == o.user) fail(ErrorCode::kCollision, "user " + o.user + " is already enrolled");
  }
  acpt::UserKeyBundle bundle;
  bundle.user_id = o.user;
  bundle.credential = acpt::make_credential(o.username, o.owner_fp, selection_key(o));
  bundle.detector = nn::load(resolve(o.detector));
  const RgbImage key = load_image(o.key_image);
  bundle.key_images = o.keys.empty() ? std::vector<RgbImage>{key} : load_images_from({o.keys});
  center.identities = acpt::enroll(center.identities, bundle.credential, key, o.user);
  const std::uint64_t value = acpt::verification_value(bundle.credential.encrypted_username, key);
  const bool accepted = acpt::detector_accepts(bundle.detector, key);
  center.bundles.push_back(std::move(bundle));
  center.save(dir);
  const auto& c = center.bundles.back().credential;
  out << "enrolled " << o.user << " encrypted_username=" << c.encrypted_username << " I="
      << phash::PerceptualHash(value).to_hex() << "\n";
  if (!accepted) out << "warning: the detector rejects this key image\n";
  emit(out, Json{{"command", "acpt enroll"},
                 {"user_id", o.user},
                 {"encrypted_username", c.encrypted_username},
                 {"k1", c.k1},
                 {"I", phash::PerceptualHash(value).to_hex()},
                 {"detector_accepts_key", accepted}});
  return kExitOk;
}

// --probe USER,ENCRYPTED_USERNAME,KEY_IMAGE
acpt::UserProbe parse_probe(const std::string& spec) {
  const auto a = spec.find(',');
  const auto b = a == std::string::npos ? a : spec.find(',', a + 1);
  if (b == std::string::npos) fail(ErrorCode::kInvalidInput, "probe must be USER,CREDENTIAL,KEY_IMAGE: " + spec);
  return {spec.substr(0, a), spec.substr(a + 1, b - a - 1), load_image(spec.substr(b + 1))};
}

int cmd_acpt_trace(const Options& o, std::ostream& out) {
  acpt::ProtectedModel suspect{acpt::AuthorizationCenter::load(resolve(o.center)), nn::load(resolve(o.model))};
  std::vector<acpt::UserProbe> probes;
  for (const auto& p : o.probes) probes.push_back(parse_probe(p));
  const nn::LabeledDataset test = load_data(o.test_images, o.test_labels);
  const acpt::AcptTraceReport r = acpt::trace_acpt(suspect, probes, test, o.seed);
  for (const auto& [user, acc] : r.per_user_accuracy) out << "accuracy." << user << "=" << acc << "\n";
  out << "leaker=" << r.leaker.value_or("inconclusive") << "\n";
  Json rec{{"command", "acpt trace"}, {"per_user_accuracy", accuracy_map(r.per_user_accuracy)}};
  rec["leaker"] = r.leaker ? Json(*r.leaker) : Json(nullptr);
  emit(out, rec);
  return r.leaker ? kExitOk : kExitDomainFailure;
}

int cmd_serve(const Options& o, std::ostream& out) {
  acpt::AuthorizationCenter center = acpt::AuthorizationCenter::load(resolve(o.center));
  nn::ModelSnapshot model = nn::load(resolve(o.model));

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  auto service = gateway::serve(o.bind, std::move(center), std::move(model), o.seed);
  out << "listening on " << service->address() << "\n";
  emit(out, Json{{"command", "serve"}, {"address", service->address()}});
  out.flush();
  if (o.duration > 0) {
    timespec ts{static_cast<time_t>(o.duration), static_cast<long>((o.duration - static_cast<time_t>(o.duration)) * 1e9)};
    sigtimedwait(&set, nullptr, &ts);
  } else {
    int sig = 0;
    sigwait(&set, &sig);
  }
  service->stop();
  pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
  out << "stopped\n";
  return kExitOk;
}

int cmd_infer(const Options& o, std::ostream& out) {
  const auto req = gateway::make_request(o.request_id, o.credential, load_image(o.key_image), load_image(o.query_image));
  const gateway::InferResponse resp = gateway::client_infer(o.address, req);
  out << "class=" << resp.class_index << "\n";
  out << resp.to_line() << "\n";
  return kExitOk;
}

int cmd_metric(const Options& o, const std::string& which, std::ostream& out) {
  const RgbImage a = load_image(o.positional.at(0));
  const RgbImage b = load_image(o.positional.at(1));
  const double v = which == "ssim" ? media::ssim(to_gray(a), to_gray(b)) : media::mse(a, b);
  out << which << "=" << v << "\n";
  emit(out, Json{{"command", "metrics " + which}, {which, v}});
  return kExitOk;
}

int cmd_synth_digits(const Options& o, std::ostream& out) {
  const fs::path dir = resolve(o.out);
  fs::create_directories(dir);
  const auto train = synth::digits(o.train_count, mix_seed(o.seed, "train"));
  const auto test = synth::digits(o.test_count, mix_seed(o.seed, "test"));
  nn::write_idx(train, dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  nn::write_idx(test, dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  out << "wrote " << train.size() << " training and " << test.size() << " test digits to " << o.out << "\n";
  emit(out, Json{{"command", "synth digits"}, {"train", train.size()}, {"test", test.size()}, {"out", o.out}});
  return kExitOk;
}

int cmd_synth_video(const Options& o, std::ostream& out) {
  const auto seq = synth::video(synth::parse_scene(o.scene), o.frames, o.seed, o.size, o.size);
  const auto bytes = media::encode_y4m(seq, media::Chroma::k444);
  const fs::path path = resolve(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "wrote " << seq.frames.size() << " " << o.scene << " frames to " << o.out << "\n";
  emit(out, Json{{"command", "synth video"}, {"scene", o.scene}, {"frames", seq.frames.size()}, {"out", o.out}});
  return kExitOk;
}

int cmd_synth_keys(const Options& o, std::ostream& out) {
  const auto images = synth::key_images(synth::parse_key_category(o.category), o.count, o.seed);
  write_images(resolve(o.out), images);
  out << "wrote " << images.size() << " " << o.category << " images to " << o.out << "\n";
  emit(out, Json{{"command", "synth keys"}, {"category", o.category}, {"count", images.size()}, {"out", o.out}});
  return kExitOk;
}

int cmd_synth_fingerprint(const Options& o, std::ostream& out) {
  const fs::path path = resolve(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  media::write_ppm(path, synth::fingerprint_image(o.seed, o.size));
  out << "wrote fingerprint to " << o.out << "\n";
  emit(out, Json{{"command", "synth fingerprint"}, {"out", o.out}});
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  o.train.epochs = pcpt::kDefaultEpochs;
  o.attack.epochs = pcpt::kDefaultEpochs;
  o.attack.learning_rate = pcpt::kAttackLearningRate;
  std::function<int()> action;

  CLI::App app{"Copyright protection and traceability for small neural networks", "tracemark"};
  app.require_subcommand(1);
  auto bind = [&action](CLI::App* cmd, std::function<int()> fn) { cmd->callback([&action, fn] { action = fn; }); };

  auto* ph = app.add_subcommand("phash", "Print the DCT perceptual hash of images");
  ph->add_option("images", o.positional, "PPM/PGM files")->required();
  bind(ph, [&] { return cmd_phash(o, out); });

  auto* frames = app.add_subcommand("frames", "Frame utilities");
  frames->require_subcommand(1);
  auto* sel = frames->add_subcommand("select", "Select a trigger set from a video");
  sel->add_option("--input", o.input, "Y4M file or directory of PPM/PGM frames")->required();
  sel->add_option("--count,-L", o.count, "Number of trigger images")->capture_default_str();
  sel->add_option("--d-min", o.d_min, "Minimum pairwise pHash distance")->capture_default_str();
  sel->add_option("--user", o.user, "User id")->required();
  sel->add_option("--label", o.label, "Additional class index")->capture_default_str();
  sel->add_option("--first", o.first, "First frame to consider");
  sel->add_option("--frames", o.frames, "Number of frames to consider");
  sel->add_option("--out", o.out, "Output directory")->required();
  bind(sel, [&] { return cmd_frames_select(o, out); });

  auto* tb = app.add_subcommand("train-base", "Train the original N-class model");
  tb->add_option("--images", o.images, "IDX images")->required();
  tb->add_option("--labels", o.labels, "IDX labels")->required();
  tb->add_option("--test-images", o.test_images, "IDX test images");
  tb->add_option("--test-labels", o.test_labels, "IDX test labels");
  tb->add_option("--out", o.out, "Model file")->required();
  add_train_flags(tb, o.train);
  bind(tb, [&] { return cmd_train_base(o, out); });

  auto* em = app.add_subcommand("embed", "Embed a user's trigger set as an additional class");
  em->add_option("--model", o.model, "Base model")->required();
  em->add_option("--images", o.images, "IDX images")->required();
  em->add_option("--labels", o.labels, "IDX labels")->required();
  em->add_option("--triggers", o.triggers, "Trigger-set directory")->required()->expected(1);
  em->add_option("--fraction", o.fraction, "Share of the training data reused")->capture_default_str();
  em->add_option("--out", o.out, "Watermarked model")->required();
  add_train_flags(em, o.train);
  bind(em, [&] { return cmd_embed(o, out); });

  auto* tr = app.add_subcommand("trace", "Trace a suspect model against trigger sets");
  tr->add_option("--model", o.model, "Suspect model")->required();
  tr->add_option("--triggers", o.triggers, "Trigger-set directories")->required();
  tr->add_option("--test-images", o.test_images, "IDX test images");
  tr->add_option("--test-labels", o.test_labels, "IDX test labels");
  add_thresholds(tr, o.thresholds);
  bind(tr, [&] { return cmd_trace(o, out); });

  auto* fi = app.add_subcommand("fidelity", "Original-task accuracy drop after embedding");
  fi->add_option("--base", o.base, "Base model")->required();
  fi->add_option("--watermarked", o.watermarked, "Watermarked model")->required();
  fi->add_option("--test-images", o.test_images, "IDX test images")->required();
  fi->add_option("--test-labels", o.test_labels, "IDX test labels")->required();
  bind(fi, [&] { return cmd_fidelity(o, out); });

  auto* at = app.add_subcommand("attack", "Model modification attacks");
  at->require_subcommand(1);
  auto* ft = at->add_subcommand("finetune", "Fine-tune on half of the test set, then trace");
  ft->add_option("--model", o.model, "Watermarked model")->required();
  ft->add_option("--test-images", o.test_images, "IDX test images")->required();
  ft->add_option("--test-labels", o.test_labels, "IDX test labels")->required();
  ft->add_option("--triggers", o.triggers, "Trigger-set directories")->required();
  ft->add_option("--out", o.out, "Attacked model");
  add_thresholds(ft, o.thresholds);
  add_train_flags(ft, o.attack);
  bind(ft, [&] { return cmd_attack_finetune(o, out); });
  auto* pr = at->add_subcommand("prune", "Global magnitude pruning, then trace");
  pr->add_option("--model", o.model, "Watermarked model")->required();
  pr->add_option("--test-images", o.test_images, "IDX test images")->required();
  pr->add_option("--test-labels", o.test_labels, "IDX test labels")->required();
  pr->add_option("--triggers", o.triggers, "Trigger-set directories")->required();
  pr->add_option("--rate", o.rates, "Prune rate(s) in [0, 1]");
  pr->add_flag("--sweep", o.sweep, "Evaluate rates 0, 0.1, ..., 0.9");
  add_thresholds(pr, o.thresholds);
  bind(pr, [&] { return cmd_attack_prune(o, out); });

  auto* lg = app.add_subcommand("ledger", "Ownership ledger");
  lg->require_subcommand(1);
  auto* la = lg->add_subcommand("append", "Record fingerprint-bound trigger hashes");
  la->add_option("--ledger", o.ledger, "Ledger file")->required();
  la->add_option("--owner", o.owner, "Owner id")->required();
  la->add_option("--fingerprint", o.fingerprint, "Owner fingerprint image")->required();
  la->add_option("--triggers", o.triggers, "Trigger-set directories");
  la->add_option("--image", o.image_list, "Individual trigger images");
  la->add_option("--note", o.note, "Free-form note");
  bind(la, [&] { return cmd_ledger_append(o, out); });
  auto* lv = lg->add_subcommand("verify", "Check the hash chain");
  lv->add_option("--ledger", o.ledger, "Ledger file")->required();
  bind(lv, [&] { return cmd_ledger_verify(o, out); });
  auto* lc = lg->add_subcommand("claim", "Find the earliest record for trigger images");
  lc->add_option("--ledger", o.ledger, "Ledger file")->required();
  lc->add_option("--fingerprint", o.fingerprint, "Claimed owner fingerprint image")->required();
  lc->add_option("--triggers", o.triggers, "Trigger-set directories");
  lc->add_option("--image", o.image_list, "Individual trigger images");
  bind(lc, [&] { return cmd_ledger_claim(o, out); });

  auto* ac = app.add_subcommand("acpt", "Authorization control");
  ac->require_subcommand(1);
  auto* cr = ac->add_subcommand("credential", "Derive an encrypted username");
  cr->add_option("--username", o.username, "User name")->required();
  cr->add_option("--owner-fp", o.owner_fp, "Owner fingerprint string")->capture_default_str();
  cr->add_option("--k1", o.k1, "Eight distinct digest positions, comma separated");
  cr->add_option("--seed", o.seed, "Seed for a random K1 when --k1 is absent")->capture_default_str();
  bind(cr, [&] { return cmd_acpt_credential(o, out); });
  auto* dt = ac->add_subcommand("detector-train", "Train a key-image detector");
  dt->add_option("--keys", o.keys, "Directory of key images")->required();
  dt->add_option("--others", o.others, "Directories of non-key images")->required();
  dt->add_option("--out", o.out, "Detector model")->required();
  add_train_flags(dt, o.train);
  bind(dt, [&] { return cmd_acpt_detector_train(o, out); });
  auto* en = ac->add_subcommand("enroll", "Enroll a user in an authorization center");
  en->add_option("--center", o.center, "Authorization center directory")->required();
  en->add_option("--user", o.user, "User id")->required();
  en->add_option("--username", o.username, "User name")->required();
  en->add_option("--owner-fp", o.owner_fp, "Owner fingerprint string")->capture_default_str();
  en->add_option("--k1", o.k1, "Eight distinct digest positions, comma separated");
  en->add_option("--seed", o.seed, "Seed for a random K1 when --k1 is absent")->capture_default_str();
  en->add_option("--key-image", o.key_image, "Key image bound to the credential")->required();
  en->add_option("--keys", o.keys, "Directory with the user's key images");
  en->add_option("--detector", o.detector, "Detector model")->required();
  bind(en, [&] { return cmd_acpt_enroll(o, out); });
  auto* at2 = ac->add_subcommand("trace", "Probe a leaked protected model with each user's key");
  at2->add_option("--center", o.center, "Leaked authorization center directory")->required();
  at2->add_option("--model", o.model, "Leaked model")->required();
  at2->add_option("--probe", o.probes, "USER,CREDENTIAL,KEY_IMAGE")->required();
  at2->add_option("--test-images", o.test_images, "IDX test images")->required();
  at2->add_option("--test-labels", o.test_labels, "IDX test labels")->required();
  at2->add_option("--seed", o.seed, "Seed for the random-class fallback")->capture_default_str();
  bind(at2, [&] { return cmd_acpt_trace(o, out); });

  auto* sv = app.add_subcommand("serve", "Serve authorized inference over TCP (NDJSON)");
  sv->add_option("--center", o.center, "Authorization center directory")->required();
  sv->add_option("--model", o.model, "Model file")->required();
  sv->add_option("--bind", o.bind, "host:port")->capture_default_str();
  sv->add_option("--seed", o.seed, "Seed for the random-class fallback")->capture_default_str();
  sv->add_option("--duration", o.duration, "Stop after this many seconds (0: until SIGINT/SIGTERM)");
  bind(sv, [&] { return cmd_serve(o, out); });

  auto* inf = app.add_subcommand("infer", "Send one request to a running service");
  inf->add_option("--address", o.address, "host:port")->required();
  inf->add_option("--credential", o.credential, "Encrypted username")->required();
  inf->add_option("--key-image", o.key_image, "Key image")->required();
  inf->add_option("--query-image", o.query_image, "Query image")->required();
  inf->add_option("--request-id", o.request_id, "Request id")->capture_default_str();
  bind(inf, [&] { return cmd_infer(o, out); });

  auto* me = app.add_subcommand("metrics", "Image quality metrics");
  me->require_subcommand(1);
  for (const char* which : {"ssim", "mse"}) {
    auto* m = me->add_subcommand(which, std::string("Compute ") + which + " between two images");
    m->add_option("images", o.positional, "Two PPM/PGM files")->required()->expected(2);
    const std::string w = which;
    bind(m, [&, w] { return cmd_metric(o, w, out); });
  }

  auto* sy = app.add_subcommand("synth", "Generate desk-scale fixtures");
  sy->require_subcommand(1);
  auto* sd = sy->add_subcommand("digits", "Handwritten-style digits as IDX files");
  sd->add_option("--out", o.out, "Output directory")->required();
  sd->add_option("--train", o.train_count, "Training items")->capture_default_str();
  sd->add_option("--test", o.test_count, "Test items")->capture_default_str();
  sd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  bind(sd, [&] { return cmd_synth_digits(o, out); });
  auto* sv2 = sy->add_subcommand("video", "Owner footage as YUV4MPEG2");
  sv2->add_option("--scene", o.scene, "flashcard-ring, flashcard-cross, garden, city or ocean")->capture_default_str();
  sv2->add_option("--frames", o.frames, "Frame count")->required();
  sv2->add_option("--size", o.size, "Frame width and height")->capture_default_str();
  sv2->add_option("--out", o.out, "Output .y4m file")->required();
  sv2->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  bind(sv2, [&] { return cmd_synth_video(o, out); });
  auto* sk = sy->add_subcommand("keys", "Key-image category samples");
  sk->add_option("--category", o.category, "apple, rabbit, car, star or house")->capture_default_str();
  sk->add_option("--count", o.count, "Image count")->capture_default_str();
  sk->add_option("--out", o.out, "Output directory")->required();
  sk->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  bind(sk, [&] { return cmd_synth_keys(o, out); });
  auto* sf = sy->add_subcommand("fingerprint", "Owner fingerprint image");
  sf->add_option("--out", o.out, "Output PPM file")->required();
  sf->add_option("--size", o.size, "Width and height")->capture_default_str();
  sf->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  bind(sf, [&] { return cmd_synth_fingerprint(o, out); });

  std::vector<std::string> argv_store{"tracemark"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  if (!action) {
    err << "usage error: no command\n";
    return kExitUsage;
  }
  try {
    return action();
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitDomainFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainFailure;
  }
}

}  // namespace tracemark::cli
