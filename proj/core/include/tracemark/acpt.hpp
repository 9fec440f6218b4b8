#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracemark/image.hpp"
#include "tracemark/nn.hpp"

namespace tracemark::acpt {

inline constexpr int kCredentialLength = 8;
inline constexpr int kDigestLength = 64;
using SelectionKey = std::array<int, kCredentialLength>;  // K1

struct Credential {
  std::string username;
  std::string encrypted_username;  // 8 characters of the SHA-256 hex digest
  SelectionKey k1{};

  std::string k1_string() const;  // comma separated
};

/// Eight distinct indices in [0, 63], comma separated.
SelectionKey parse_k1(std::string_view csv);
SelectionKey random_k1(std::uint64_t seed);

/// m = sha256_hex(owner_fp + "_" + username); the encrypted username is
/// m[k1[0]] m[k1[1]] ... m[k1[7]].
Credential make_credential(std::string_view username, std::string_view owner_fp, const SelectionKey& k1);

/// m1: the 8 ASCII bytes of the encrypted username, first character in the
/// most significant byte.
std::uint64_t credential_bits(std::string_view encrypted_username);

/// I = m1 XOR pHash(key image).
std::uint64_t verification_value(std::string_view encrypted_username, const RgbImage& key_image);

// Q: the legitimate-user identity base.
class IdentityBase {
 public:
  const std::map<std::uint64_t, std::string>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::optional<std::string> lookup(std::uint64_t value) const;

  /// Throws kCollision (naming both users) if `value` is already present.
  void insert(std::uint64_t value, const std::string& user_id);

  /// NDJSON, one {"user_id", "I"} object per line, I as 16 hex characters.
  void save(const std::filesystem::path& path) const;
  static IdentityBase load(const std::filesystem::path& path);

 private:
  std::map<std::uint64_t, std::string> entries_;
};

IdentityBase enroll(const IdentityBase& base, const Credential& credential, const RgbImage& key_image,
                    const std::string& user_id);

/// The enrolled user, or nullopt. A credential that is not exactly eight
/// characters is an input error, not a rejection.
std::optional<std::string> validate(const IdentityBase& base, std::string_view encrypted_username,
                                    const RgbImage& key_image);

// ---- detector ----------------------------------------------------------------

inline constexpr nn::Shape kDetectorInput{3, 28, 28};
inline constexpr int kKeyClass = 1;

/// Binary classifier: key images are class 1, everything else class 0.
nn::ModelSnapshot train_detector(std::span<const RgbImage> key_images, std::span<const RgbImage> other_images,
                                 const nn::TrainConfig& cfg);

double key_probability(const nn::ModelSnapshot& detector, const RgbImage& image);
bool detector_accepts(const nn::ModelSnapshot& detector, const RgbImage& image);  // P(key) > 0.5

// ---- authorization control -------------------------------------------------------

struct UserKeyBundle {
  std::string user_id;
  std::vector<RgbImage> key_images;  // SK
  nn::ModelSnapshot detector;
  Credential credential;
};

struct AuthorizationCenter {
  std::vector<UserKeyBundle> bundles;
  IdentityBase identities;

  /// <dir>/identities.ndjson and <dir>/users/<id>/{detector.tnn,credential.txt,keys/NNN.ppm}
  void save(const std::filesystem::path& dir) const;
  static AuthorizationCenter load(const std::filesystem::path& dir);
};

struct ProtectedModel {
  AuthorizationCenter center;
  nn::ModelSnapshot model;
};

/// Per-request seed for the random-class fallback.
std::uint64_t request_seed(std::uint64_t service_seed, std::string_view request_id);

/// Uniform class in [0, num_classes) drawn from a stream seeded by `seed`.
int random_class(std::uint64_t seed, int num_classes);

/// The user whose validator entry matches and whose detector accepts the
/// key image, if any.
std::optional<std::string> authenticate(const AuthorizationCenter& center, std::string_view encrypted_username,
                                        const RgbImage& key_image);

/// argmax of the true model when authenticated, a seeded random class
/// otherwise; the two cases are indistinguishable to the caller.
int authorize(const AuthorizationCenter& center, const nn::ModelSnapshot& true_model,
              std::string_view encrypted_username, const RgbImage& key_image, std::span<const float> query,
              std::uint64_t rng_seed);
int authorize(const AuthorizationCenter& center, const nn::ModelSnapshot& true_model,
              std::string_view encrypted_username, const RgbImage& key_image, const RgbImage& query_image,
              std::uint64_t rng_seed);

// ---- traceability ------------------------------------------------------------

inline constexpr double kLeakerMinAccuracy = 0.8;
inline constexpr double kOthersMaxAccuracy = 0.3;

struct UserProbe {
  std::string user_id;
  std::string encrypted_username;
  RgbImage key_image;
};

struct AcptTraceReport {
  std::map<std::string, double> per_user_accuracy;
  std::optional<std::string> leaker;  // nullopt: inconclusive
};

/// Leaker = the user at >= 0.8 while every other user is <= 0.3.
std::optional<std::string> decide_leaker(const std::map<std::string, double>& accuracy);

AcptTraceReport trace_acpt(const ProtectedModel& suspect, std::span<const UserProbe> probes,
                           const nn::LabeledDataset& test, std::uint64_t seed);

}  // namespace tracemark::acpt
