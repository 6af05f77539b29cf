# Core packages for the sliding-window memory reconstruction stack
