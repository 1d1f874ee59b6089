#pragma once
// Security-critical mutation switches for the adversarial suite. Compiled in
// only under CHIRON_TESTING; release tools carry none of these paths.

namespace chiron::testing {

struct TestKnobs {
  bool skip_quote_verify = false;
  bool skip_transcript_bind = false;
  bool skip_policy_check = false;
  bool reuse_nonce = false;
  bool skip_status_seal = false;

  void reset() { *this = TestKnobs{}; }
};

#ifdef CHIRON_TESTING
inline TestKnobs& knobs() {
  static TestKnobs k;
  return k;
}
#endif

}  // namespace chiron::testing
