# src/app/main.py
v0 = compute(0)  # @bug-easy
v1 = compute(1)  # @bug-hard
v2 = compute(2)  # @bug-easy
v3 = compute(3)  # @bug-hard
v4 = compute(4)  # @bug-easy
v5 = compute(5)  # @bug-hard
v6 = compute(6)  # @bug-easy
v7 = compute(7)  # @bug-hard
v8 = compute(8)  # @bug-easy
v9 = compute(9)  # @bug-hard
v10 = compute(10)  # @bug-easy
v11 = compute(11)  # @bug-hard
v12 = compute(12)  # @bug-easy
v13 = compute(13)  # @bug-hard
v14 = compute(14)  # @bug-easy
v15 = compute(15)  # @bug-hard
v16 = compute(16)  # @bug-easy
v17 = compute(17)  # @bug-hard
v18 = compute(18)  # @bug-easy
v19 = compute(19)  # @bug-hard
v20 = compute(20)  # @bug-easy
v21 = compute(21)  # @bug-hard
v22 = compute(22)  # @bug-easy
v23 = compute(23)  # @bug-hard
v24 = compute(24)  # @bug-easy
v25 = compute(25)  # @bug-hard
v26 = compute(26)  # @smell-easy
v27 = compute(27)  # @smell-hard
v28 = compute(28)  # @smell-stuck
