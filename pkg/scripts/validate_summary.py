import os
import json
import sys

REQUIRED_KEYS = {
    "version": str,
    "case": str,
    "seed": int,
    "status": str,
    "exit_code": int,
    "config": dict,
    "artifacts": list,
}
STATUSES = ("passed", "failed", "error")


def validate_summary(filepath):
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            data = json.load(f)

        if not isinstance(data, dict):
            print("Error: Root element is not an object.")
            sys.exit(1)

        for key, kind in REQUIRED_KEYS.items():
            if key not in data:
                print(f"Error: Missing key '{key}'.")
                sys.exit(1)
            if not isinstance(data[key], kind) or isinstance(data[key], bool):
                print(f"Error: Key '{key}' should be of type {kind.__name__}.")
                sys.exit(1)

        if data["status"] not in STATUSES:
            print(f"Error: Invalid status '{data['status']}'.")
            sys.exit(1)

        if data["status"] != "error":
            for key in ("t_final", "accepted_steps", "checks", "measured"):
                if key not in data:
                    print(f"Error: Completed run is missing '{key}'.")
                    sys.exit(1)
            for name, check in data["checks"].items():
                if set(check) != {"value", "limit", "passed"}:
                    print(f"Error: Malformed check '{name}': {check}")
                    sys.exit(1)
                if check["passed"] != (check["value"] <= check["limit"]):
                    print(f"Error: Check '{name}' verdict disagrees with its value.")
                    sys.exit(1)
        elif "error" not in data:
            print("Error: Failed run does not record its error.")
            sys.exit(1)

        print(f"Successfully validated {filepath}: status {data['status']}, "
              f"{len(data.get('checks', {}))} checks.")

    except Exception as e:
        print(f"Error: {e}")
        sys.exit(1)


if __name__ == "__main__":
    if len(sys.argv) > 1:
        summary_path = sys.argv[1]
    else:
        summary_path = os.path.join(os.getcwd(), "results", "summary.json")
    validate_summary(summary_path)
