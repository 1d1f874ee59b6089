// chiron-provider: provisions a model configuration into the serving enclave.
//
// The config is validated locally first so schema rejections come back with a
// field path instead of a bare server denial, then pushed over an attested
// channel. Trust anchors (--root-pk, --expected-measurement) come from the
// server operator out of band, same as vendor attestation root certs.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "chiron/client.hpp"

namespace {

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace chiron;

  CLI::App cli{"chiron-provider: provision a model config"};
  std::string server, config_path, root_pk_hex, measurement_hex;
  cli.add_option("--server", server, "server address:port")->required();
  cli.add_option("--config", config_path, "model config JSON file")->required();
  cli.add_option("--root-pk", root_pk_hex, "platform root public key (hex)")->required();
  cli.add_option("--expected-measurement", measurement_hex, "expected enclave measurement (hex)")
      ->required();
  CLI11_PARSE(cli, argc, argv);

  std::string config_json;
  if (!read_file(config_path, config_json)) {
    std::cerr << "chiron-provider: cannot read " << config_path << "\n";
    return client::kExitProtocol;
  }

  auto local = sandbox::validate_config(to_bytes(config_json));
  if (!local.ok()) {
    std::cerr << "chiron-provider: config rejected: "
              << sandbox::config_reject_name(local.error().code);
    if (!local.error().path.empty()) std::cerr << " at " << local.error().path;
    std::cerr << "\n";
    return client::kExitProtocol;
  }

  auto measurement = enclave::Measurement::from_hex(measurement_hex);
  auto root_pk_raw = hex_decode(root_pk_hex);
  if (!measurement || !root_pk_raw || root_pk_raw->size() != 32) {
    std::cerr << "chiron-provider: trust anchors must be 64 hex chars\n";
    return client::kExitProtocol;
  }
  std::array<uint8_t, 32> root_pk{};
  std::copy(root_pk_raw->begin(), root_pk_raw->end(), root_pk.begin());

  auto ep = net::parse_endpoint(server);
  if (!ep) {
    std::cerr << "chiron-provider: bad --server address: " << server << "\n";
    return client::kExitProtocol;
  }
  net::TcpStream stream;
  try {
    stream = net::connect_tcp(ep->host, ep->port);
  } catch (const Error& e) {
    std::cerr << "chiron-provider: cannot connect to " << server << ": " << e.what() << "\n";
    return client::kExitProtocol;
  }

  auto attested = client::attest(std::move(stream), app::SessionRole::PROVIDER, *measurement,
                                 root_pk);
  if (!attested.ok()) {
    std::cerr << "chiron-provider: " << attested.error().message << "\n";
    return attested.error().exit_code;
  }

  auto status = client::provision(attested.value(), to_bytes(config_json));
  if (!status.ok()) {
    std::cerr << "chiron-provider: " << status.error().message << "\n";
    return status.error().exit_code;
  }
  std::cout << "provisioned state=" << sandbox::job_state_name(status.value().state)
            << " epoch=" << status.value().epoch << "\n";
  if (status.value().state == sandbox::JobState::FAILED) {
    std::cerr << "chiron-provider: enclave rejected the config\n";
    return client::kExitProtocol;
  }
  return client::kExitOk;
}
