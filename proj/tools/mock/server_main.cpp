#include <CLI11.hpp>

#include <iostream>

#include "mock_llm.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deterministic mock chat-completions and hidden-state server", "ssbc-mock-server"};
  std::string host = "127.0.0.1";
  int port = 8080;
  ssbc::mock::MockOptions options;
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port (0 = ephemeral)");
  app.add_option("--hidden-dim", options.hidden_dim, "Hidden-state width");
  app.add_option("--layers", options.layers, "Number of layers");
  CLI11_PARSE(app, argc, argv);

  try {
    ssbc::mock::MockServer server(options);
    if (port == 0) {
      port = server.start(host, 0);
      std::cout << "listening on http://" << host << ":" << port << std::endl;
      std::cin.get();  // serve until stdin closes
      server.stop();
    } else {
      std::cout << "listening on http://" << host << ":" << port << std::endl;
      server.serve(host, port);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
