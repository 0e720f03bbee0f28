"""NSL-KDD record layout and the attack-name taxonomy.

The taxonomy covers every attack name that occurs in KDDTrain+ and KDDTest+
(the KDD-99 categories plus the extra attacks introduced in the test split).
"""

NORMAL, DOS, PROBE = 0, 1, 2
CLASS_NAMES = ("normal", "dos", "probe")
N_CLASSES = len(CLASS_NAMES)

# (name, kind) in file order. Kinds: continuous, integer, binary, categorical.
COLUMNS = (
    ("duration", "integer"),
    ("protocol_type", "categorical"),
    ("service", "categorical"),
    ("flag", "categorical"),
    ("src_bytes", "integer"),
    ("dst_bytes", "integer"),
    ("land", "binary"),
    ("wrong_fragment", "integer"),
    ("urgent", "integer"),
    ("hot", "integer"),
    ("num_failed_logins", "integer"),
    ("logged_in", "binary"),
    ("num_compromised", "integer"),
    ("root_shell", "binary"),
    # documented as binary but KDDTrain+ contains the value 2
    ("su_attempted", "integer"),
    ("num_root", "integer"),
    ("num_file_creations", "integer"),
    ("num_shells", "integer"),
    ("num_access_files", "integer"),
    ("num_outbound_cmds", "integer"),
    ("is_host_login", "binary"),
    ("is_guest_login", "binary"),
    ("count", "integer"),
    ("srv_count", "integer"),
    ("serror_rate", "continuous"),
    ("srv_serror_rate", "continuous"),
    ("rerror_rate", "continuous"),
    ("srv_rerror_rate", "continuous"),
    ("same_srv_rate", "continuous"),
    ("diff_srv_rate", "continuous"),
    ("srv_diff_host_rate", "continuous"),
    ("dst_host_count", "integer"),
    ("dst_host_srv_count", "integer"),
    ("dst_host_same_srv_rate", "continuous"),
    ("dst_host_diff_srv_rate", "continuous"),
    ("dst_host_same_src_port_rate", "continuous"),
    ("dst_host_srv_diff_host_rate", "continuous"),
    ("dst_host_serror_rate", "continuous"),
    ("dst_host_srv_serror_rate", "continuous"),
    ("dst_host_rerror_rate", "continuous"),
    ("dst_host_srv_rerror_rate", "continuous"),
)
N_FEATURES = len(COLUMNS)
COLUMN_NAMES = tuple(name for name, _ in COLUMNS)
CATEGORICAL_COLUMNS = tuple(i for i, (_, kind) in enumerate(COLUMNS) if kind == "categorical")

ATTACK_CATEGORIES = {
    "normal": "normal",
    # denial of service
    "back": "dos",
    "land": "dos",
    "neptune": "dos",
    "pod": "dos",
    "smurf": "dos",
    "teardrop": "dos",
    "apache2": "dos",
    "mailbomb": "dos",
    "processtable": "dos",
    "udpstorm": "dos",
    # probing
    "ipsweep": "probe",
    "nmap": "probe",
    "portsweep": "probe",
    "satan": "probe",
    "mscan": "probe",
    "saint": "probe",
    # remote to local
    "ftp_write": "r2l",
    "guess_passwd": "r2l",
    "imap": "r2l",
    "multihop": "r2l",
    "phf": "r2l",
    "spy": "r2l",
    "warezclient": "r2l",
    "warezmaster": "r2l",
    "named": "r2l",
    "sendmail": "r2l",
    "snmpgetattack": "r2l",
    "snmpguess": "r2l",
    "worm": "r2l",
    "xlock": "r2l",
    "xsnoop": "r2l",
    # user to root
    "buffer_overflow": "u2r",
    "loadmodule": "u2r",
    "perl": "u2r",
    "rootkit": "u2r",
    "httptunnel": "u2r",
    "ps": "u2r",
    "sqlattack": "u2r",
    "xterm": "u2r",
}

KEPT_CATEGORIES = {"normal": NORMAL, "dos": DOS, "probe": PROBE}


def class_index(name):
    """Map a class name ("normal", "DOS", "Probe", ...) or index string to its label."""
    key = str(name).strip().lower()
    if key.isdigit() and int(key) < N_CLASSES:
        return int(key)
    try:
        return CLASS_NAMES.index(key)
    except ValueError:
        raise ValueError(f"unknown class {name!r}; expected one of {', '.join(CLASS_NAMES)}") from None
