import os
import random

import numpy as np
import torch

DTYPE = torch.float64


def seed_everything(seed: int) -> torch.Generator:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    return torch.Generator().manual_seed(seed)


def create_dir_if_not_exist(path: str):
    if not os.path.exists(path):
        os.makedirs(path)


def format_elapsed(elapsed_time: float) -> str:
    minutes = int(elapsed_time // 60)
    seconds = int(elapsed_time % 60)
    return f'{minutes:02}:{seconds:02}'
