import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    # Paths
    DATASET_ROOT = os.getenv("AEC_DATASET_ROOT")
    OUTPUT_DIR = os.getenv("AEC_OUTPUT_DIR", "results")
    RESULTS_LOG = os.getenv("AEC_RESULTS_LOG", "results/results_log.csv")

    # Logging
    LOG_LEVEL = os.getenv("AEC_LOG_LEVEL", "INFO")

    # IMS record layout
    TIMESTAMP_FORMAT = os.getenv("AEC_TIMESTAMP_FORMAT", "%Y.%m.%d.%H.%M.%S")
    RECORD_ROWS = 20480          # 1 s at 20 kHz
    SAMPLING_RATE = 20480.0      # Hz, one record spans one second
    SAMPLES_PER_DAY = 144        # one record every 10 minutes
    PARSE_WORKERS = int(os.getenv("AEC_PARSE_WORKERS", "4"))

    # Rig
    SHAFT_FREQUENCY = 2000.0 / 60.0   # 2000 RPM
    FAULT_FREQUENCY = 296.9           # inner race defect frequency, Hz

    # Detector
    DETECTION_THETA = 0.9
    DETECTION_LAG = 100


# Published run-to-failure cases. "monitored" is the degradation starting
# point of the full-data run, "online" maps sensor -> prediction of the 70%
# run, used as cross-checks for the accuracy metric.
IMS_EXPERIMENTS = {
    "S1B3": {"test": 1, "bearing": 3, "n_samples": 2156, "channels": 8,
             "monitored": 2027, "online": {1: 2120, 2: 2122}},
    "S1B4": {"test": 1, "bearing": 4, "n_samples": 2156, "channels": 8,
             "monitored": 1641, "online": {1: 1681, 2: 1673}},
    "S2B1": {"test": 2, "bearing": 1, "n_samples": 984, "channels": 4,
             "monitored": 547, "online": {1: 610}},
    "S3B3": {"test": 3, "bearing": 3, "n_samples": 4448, "channels": 4,
             "monitored": 2367, "online": {1: 2435}},
}


# Desk-scale settings for CI-speed runs. Not the published setting
# (20480 inputs, 1000 hidden units).
DESK_PRESET = {
    "decimation": 16,
    "autoencoder": {"hidden_dim": 64},
    "training": {"max_epochs": 150, "grad_tol": 1e-6, "cost_tol": 1e-9},
    "aec": {"w_size": 10, "min_span": 0.5},
}

PUBLISHED_PRESET = {
    "decimation": 1,
    "autoencoder": {"hidden_dim": 1000},
    "training": {"max_epochs": 400},
    "aec": {"w_size": 10, "min_span": 0.0},
}
