"""Test double for an external simulator.

Reads one protocol-1 request from stdin and writes one reply: each output
row is [theta_i, seed mod 1000, batch_index] so the test can see exactly
what the engine sent.  Behaviors for failure-path tests are selected by
argv[1]:

    echo        normal operation (default)
    exit3       write garbage to stderr and exit 3
    sleep       never answer (timeout path)
    short       reply with batch_size - 1 rows
    badversion  reply with protocol 2
    notjson     emit something that is not JSON
"""

import json
import sys
import time


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "echo"
    if mode == "sleep":
        time.sleep(3600)
    req = json.load(sys.stdin)
    if mode == "exit3":
        print("simulator blew up", file=sys.stderr)
        sys.exit(3)
    if mode == "notjson":
        sys.stdout.write("this is not json")
        return
    name = sorted(req["parameters"])[0]
    rows = [[v, req["seed"] % 1000, req["batch_index"]]
            for v in req["parameters"][name]]
    if mode == "short":
        rows = rows[:-1]
    version = 2 if mode == "badversion" else 1
    json.dump({"protocol": version, "output": rows}, sys.stdout)


if __name__ == "__main__":
    main()
