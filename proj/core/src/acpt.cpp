#include "tracemark/acpt.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tracemark/digest.hpp"
#include "tracemark/error.hpp"
#include "tracemark/media.hpp"
#include "tracemark/phash.hpp"
#include "tracemark/random.hpp"

namespace tracemark::acpt {

namespace {

void check_k1(const SelectionKey& k1) {
  for (std::size_t i = 0; i < k1.size(); ++i) {
    if (k1[i] < 0 || k1[i] >= kDigestLength) fail(ErrorCode::kInvalidInput, "K1 index outside [0, 63]");
    for (std::size_t j = 0; j < i; ++j) {
      if (k1[i] == k1[j]) fail(ErrorCode::kInvalidInput, "K1 indices must be distinct");
    }
  }
}

void check_credential_length(std::string_view encrypted_username) {
  if (encrypted_username.size() != kCredentialLength) {
    fail(ErrorCode::kInvalidInput, "encrypted username must be exactly 8 characters, got " +
                                       std::to_string(encrypted_username.size()));
  }
}

}  // namespace

std::string Credential::k1_string() const {
  std::string out;
  for (std::size_t i = 0; i < k1.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(k1[i]);
  }
  return out;
}

SelectionKey parse_k1(std::string_view csv) {
  SelectionKey k{};
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t end = csv.find(',', pos);
    if (end == std::string_view::npos) end = csv.size();
    const std::string_view tok = csv.substr(pos, end - pos);
    int v = -1;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) fail(ErrorCode::kInvalidInput, "K1 entry is not an integer");
    if (n == k.size()) fail(ErrorCode::kInvalidInput, "K1 must have exactly 8 indices");
    k[n++] = v;
    pos = end + 1;
  }
  if (n != k.size()) fail(ErrorCode::kInvalidInput, "K1 must have exactly 8 indices");
  check_k1(k);
  return k;
}

SelectionKey random_k1(std::uint64_t seed) {
  std::array<int, kDigestLength> all{};
  for (int i = 0; i < kDigestLength; ++i) all[i] = i;
  SplitMix64 rng(seed);
  SelectionKey k{};
  for (int i = 0; i < kCredentialLength; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(kDigestLength - i)));
    std::swap(all[i], all[j]);
    k[i] = all[i];
  }
  return k;
}

Credential make_credential(std::string_view username, std::string_view owner_fp, const SelectionKey& k1) {
  check_k1(k1);
  std::string material(owner_fp);
  material += "_";
  material += username;
  const std::string m = digest::sha256_hex(material);
  Credential c;
  c.username = std::string(username);
  c.k1 = k1;
  for (int idx : k1) c.encrypted_username.push_back(m[static_cast<std::size_t>(idx)]);
  return c;
}

std::uint64_t credential_bits(std::string_view encrypted_username) {
  check_credential_length(encrypted_username);
  std::uint64_t v = 0;
  for (char c : encrypted_username) v = (v << 8) | static_cast<unsigned char>(c);
  return v;
}

std::uint64_t verification_value(std::string_view encrypted_username, const RgbImage& key_image) {
  return credential_bits(encrypted_username) ^ phash::hash_image(key_image).bits();
}

std::optional<std::string> IdentityBase::lookup(std::uint64_t value) const {
  const auto it = entries_.find(value);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void IdentityBase::insert(std::uint64_t value, const std::string& user_id) {
  const auto [it, inserted] = entries_.emplace(value, user_id);
  if (!inserted) {
    fail(ErrorCode::kCollision, "verification value " + phash::PerceptualHash(value).to_hex() +
                                    " already enrolled for " + it->second + "; cannot enroll " + user_id);
  }
}

void IdentityBase::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& [value, user] : entries_) {
    nlohmann::ordered_json j;
    j["user_id"] = user;
    j["I"] = phash::PerceptualHash(value).to_hex();
    out << j.dump() << "\n";
  }
  if (!out) fail(ErrorCode::kIo, "short write to " + path.string());
}

IdentityBase IdentityBase::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  IdentityBase base;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      base.insert(phash::PerceptualHash::from_hex(j.at("I").get<std::string>()).bits(),
                  j.at("user_id").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kFormat, std::string("bad identity record: ") + e.what());
    }
  }
  return base;
}

IdentityBase enroll(const IdentityBase& base, const Credential& credential, const RgbImage& key_image,
                    const std::string& user_id) {
  IdentityBase out = base;
  out.insert(verification_value(credential.encrypted_username, key_image), user_id);
  return out;
}

std::optional<std::string> validate(const IdentityBase& base, std::string_view encrypted_username,
                                    const RgbImage& key_image) {
  return base.lookup(verification_value(encrypted_username, key_image));
}

nn::ModelSnapshot train_detector(std::span<const RgbImage> key_images, std::span<const RgbImage> other_images,
                                 const nn::TrainConfig& cfg) {
  if (key_images.empty() || other_images.empty()) {
    fail(ErrorCode::kInvalidInput, "train_detector needs key and non-key images");
  }
  const auto& ref = key_images.front();
  for (const auto* pool : {&key_images, &other_images}) {
    for (const RgbImage& img : *pool) {
      if (img.width != ref.width || img.height != ref.height) {
        fail(ErrorCode::kInvalidInput, "train_detector: images must share one shape");
      }
    }
  }
  nn::LabeledDataset data;
  data.shape = kDetectorInput;
  data.num_classes = 2;
  const auto& s = kDetectorInput;
  for (const RgbImage& img : key_images) data.add(media::to_tensor(img, s.channels, s.height, s.width), kKeyClass);
  for (const RgbImage& img : other_images) data.add(media::to_tensor(img, s.channels, s.height, s.width), 1 - kKeyClass);

  const nn::ModelSnapshot init = nn::build_model(
      kDetectorInput, {nn::conv2d(6, 5), nn::relu(), nn::max_pool(2), nn::dense(32), nn::relu(), nn::dense(2)},
      mix_seed(cfg.seed, "detector-init"));
  return nn::train(init, data, cfg);
}

double key_probability(const nn::ModelSnapshot& detector, const RgbImage& image) {
  const auto& s = detector.input;
  return nn::forward(detector, media::to_tensor(image, s.channels, s.height, s.width))[kKeyClass];
}

bool detector_accepts(const nn::ModelSnapshot& detector, const RgbImage& image) {
  return key_probability(detector, image) > 0.5;
}

std::uint64_t request_seed(std::uint64_t service_seed, std::string_view request_id) {
  return mix_seed(service_seed, request_id);
}

int random_class(std::uint64_t seed, int num_classes) {
  if (num_classes <= 0) fail(ErrorCode::kInvalidInput, "random_class: no classes");
  SplitMix64 rng(seed);
  return static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes)));
}

std::optional<std::string> authenticate(const AuthorizationCenter& center, std::string_view encrypted_username,
                                        const RgbImage& key_image) {
  const std::optional<std::string> user = validate(center.identities, encrypted_username, key_image);
  if (!user) return std::nullopt;
  for (const UserKeyBundle& b : center.bundles) {
    if (b.user_id == *user && detector_accepts(b.detector, key_image)) return user;
  }
  return std::nullopt;
}

int authorize(const AuthorizationCenter& center, const nn::ModelSnapshot& true_model,
              std::string_view encrypted_username, const RgbImage& key_image, std::span<const float> query,
              std::uint64_t rng_seed) {
  if (query.size() != true_model.input.size()) {
    fail(ErrorCode::kInvalidInput, "query does not match the model input " + nn::to_string(true_model.input));
  }
  if (authenticate(center, encrypted_username, key_image)) return nn::predict(true_model, query);
  return random_class(rng_seed, true_model.num_classes);
}

int authorize(const AuthorizationCenter& center, const nn::ModelSnapshot& true_model,
              std::string_view encrypted_username, const RgbImage& key_image, const RgbImage& query_image,
              std::uint64_t rng_seed) {
  const auto& s = true_model.input;
  return authorize(center, true_model, encrypted_username, key_image,
                   media::to_tensor(query_image, s.channels, s.height, s.width), rng_seed);
}

std::optional<std::string> decide_leaker(const std::map<std::string, double>& accuracy) {
  std::optional<std::string> leaker;
  for (const auto& [user, acc] : accuracy) {
    if (acc >= kLeakerMinAccuracy) {
      if (leaker) return std::nullopt;
      leaker = user;
    }
  }
  if (!leaker) return std::nullopt;
  for (const auto& [user, acc] : accuracy) {
    if (user != *leaker && acc > kOthersMaxAccuracy) return std::nullopt;
  }
  return leaker;
}

AcptTraceReport trace_acpt(const ProtectedModel& suspect, std::span<const UserProbe> probes,
                           const nn::LabeledDataset& test, std::uint64_t seed) {
  if (probes.size() < 2) fail(ErrorCode::kInvalidInput, "trace_acpt needs at least two user probes");
  if (test.size() == 0) fail(ErrorCode::kInvalidInput, "trace_acpt needs test data");
  AcptTraceReport report;
  for (const UserProbe& probe : probes) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const std::uint64_t s = mix_seed(mix_seed(seed, probe.user_id), i);
      if (authorize(suspect.center, suspect.model, probe.encrypted_username, probe.key_image, test.input(i), s) ==
          test.labels[i]) {
        ++hits;
      }
    }
    report.per_user_accuracy[probe.user_id] = static_cast<double>(hits) / static_cast<double>(test.size());
  }
  report.leaker = decide_leaker(report.per_user_accuracy);
  return report;
}

// ---- persistence -------------------------------------------------------------

void AuthorizationCenter::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir / "users");
  identities.save(dir / "identities.ndjson");
  for (const UserKeyBundle& b : bundles) {
    const auto udir = dir / "users" / b.user_id;
    std::filesystem::create_directories(udir / "keys");
    nn::save(b.detector, udir / "detector.tnn");
    std::ofstream cred(udir / "credential.txt", std::ios::trunc);
    cred << "username=" << b.credential.username << "\n"
         << "encrypted_username=" << b.credential.encrypted_username << "\n"
         << "k1=" << b.credential.k1_string() << "\n";
    if (!cred) fail(ErrorCode::kIo, "cannot write credential for " + b.user_id);
    for (std::size_t i = 0; i < b.key_images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%03zu.ppm", i);
      media::write_ppm(udir / "keys" / name, b.key_images[i]);
    }
  }
}

AuthorizationCenter AuthorizationCenter::load(const std::filesystem::path& dir) {
  AuthorizationCenter center;
  center.identities = IdentityBase::load(dir / "identities.ndjson");
  std::error_code ec;
  if (!std::filesystem::is_directory(dir / "users", ec)) return center;
  std::vector<std::filesystem::path> users;
  for (const auto& e : std::filesystem::directory_iterator(dir / "users")) {
    if (e.is_directory()) users.push_back(e.path());
  }
  std::sort(users.begin(), users.end());
  for (const auto& udir : users) {
    UserKeyBundle b;
    b.user_id = udir.filename().string();
    b.detector = nn::load(udir / "detector.tnn");
    std::ifstream cred(udir / "credential.txt");
    if (!cred) fail(ErrorCode::kIo, "missing credential for " + b.user_id);
    std::string line;
    while (std::getline(cred, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
      if (key == "username") b.credential.username = value;
      else if (key == "encrypted_username") b.credential.encrypted_username = value;
      else if (key == "k1") b.credential.k1 = parse_k1(value);
    }
    if (std::filesystem::is_directory(udir / "keys", ec)) {
      b.key_images = media::load_frame_dir(udir / "keys").frames;
    }
    center.bundles.push_back(std::move(b));
  }
  return center;
}

}  // namespace tracemark::acpt
