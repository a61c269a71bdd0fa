"""Launcher: python -m model_server [--host HOST] [--port PORT]."""

import argparse

import uvicorn

from .app import ServerConfig, create_app


def main() -> None:
    parser = argparse.ArgumentParser(prog="model_server")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    args = parser.parse_args()
    uvicorn.run(create_app(ServerConfig.from_env()), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
