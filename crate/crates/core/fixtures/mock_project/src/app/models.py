# src/app/models.py
v0 = compute(0)  # @bug-hard
v1 = compute(1)  # @bug-easy
v2 = compute(2)  # @bug-hard
v3 = compute(3)  # @bug-easy
v4 = compute(4)  # @bug-hard
v5 = compute(5)  # @bug-easy
v6 = compute(6)  # @bug-hard
v7 = compute(7)  # @bug-easy
v8 = compute(8)  # @bug-hard
v9 = compute(9)  # @bug-easy
v10 = compute(10)  # @bug-hard
v11 = compute(11)  # @bug-easy
v12 = compute(12)  # @bug-hard
v13 = compute(13)  # @bug-easy
v14 = compute(14)  # @bug-hard
v15 = compute(15)  # @bug-easy
v16 = compute(16)  # @bug-hard
v17 = compute(17)  # @bug-easy
v18 = compute(18)  # @bug-hard
v19 = compute(19)  # @bug-easy
v20 = compute(20)  # @bug-hard
v21 = compute(21)  # @bug-easy
v22 = compute(22)  # @bug-hard
v23 = compute(23)  # @bug-easy
v24 = compute(24)  # @bug-hard
v25 = compute(25)  # @bug-easy
