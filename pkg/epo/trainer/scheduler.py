def adaptive_lr(current_lr: float, measured_kl: float, kl_threshold: float = 0.016,
                lr_min: float = 1e-6, lr_max: float = 1e-2) -> float:
    """Shrink the lr by 1.5 above twice the KL threshold, grow it by 1.5 below half of it"""
    lr = current_lr
    if measured_kl > 2.0 * kl_threshold:
        lr = max(current_lr / 1.5, lr_min)
    elif measured_kl < 0.5 * kl_threshold:
        lr = min(current_lr * 1.5, lr_max)
    return lr
